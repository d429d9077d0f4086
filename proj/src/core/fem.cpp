#include "fem.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <unordered_map>

namespace ttasgfem::fem {

namespace {

std::uint64_t edge_key(int a, int b) {
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return (hi << 32) | lo;
}

double dist(const Point& a, const Point& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

bool on_boundary(const Point& p) { return p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0; }

} // namespace

Mesh::Mesh(std::vector<Point> vertices, std::vector<Triangle> triangles, std::vector<std::array<int, 2>> parents)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)), parents_(std::move(parents)) {
    if (parents_.size() != vertices_.size()) throw DimensionError("Mesh: one parent entry per vertex required");
    for (const auto& t : triangles_)
        for (int v : t)
            if (v < 0 || v >= static_cast<int>(vertices_.size())) throw DimensionError("Mesh: vertex id out of range");
    build_topology();
}

void Mesh::build_topology() {
    facets_.clear();
    tri_facets_.assign(triangles_.size(), {-1, -1, -1});
    std::unordered_map<std::uint64_t, int> lookup;
    lookup.reserve(triangles_.size() * 2);
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        const auto& tri = triangles_[t];
        if (area(static_cast<int>(t)) <= 0.0) throw DimensionError("Mesh: degenerate or clockwise triangle");
        for (int e = 0; e < 3; ++e) {
            const int a = tri[(e + 1) % 3];
            const int b = tri[(e + 2) % 3];
            const auto key = edge_key(a, b);
            auto it = lookup.find(key);
            if (it == lookup.end()) {
                Facet f;
                f.v = {a, b};
                f.t = {static_cast<int>(t), -1};
                lookup.emplace(key, static_cast<int>(facets_.size()));
                tri_facets_[t][static_cast<std::size_t>(e)] = static_cast<int>(facets_.size());
                facets_.push_back(f);
            } else {
                Facet& f = facets_[static_cast<std::size_t>(it->second)];
                if (f.t[1] >= 0) throw DimensionError("Mesh: facet shared by more than two triangles");
                f.t[1] = static_cast<int>(t);
                tri_facets_[t][static_cast<std::size_t>(e)] = it->second;
            }
        }
    }
    free_index_.assign(vertices_.size(), -1);
    free_vertices_.clear();
    for (std::size_t v = 0; v < vertices_.size(); ++v) {
        if (!on_boundary(vertices_[v])) {
            free_index_[v] = static_cast<int>(free_vertices_.size());
            free_vertices_.push_back(static_cast<int>(v));
        }
    }
    // A facet with a single neighbour must lie on the boundary of the square,
    // otherwise the mesh has a hanging node.
    for (const auto& f : facets_) {
        if (f.boundary()) {
            const auto& a = vertices_[static_cast<std::size_t>(f.v[0])];
            const auto& b = vertices_[static_cast<std::size_t>(f.v[1])];
            const bool same_side = (a[0] == b[0] && (a[0] == 0.0 || a[0] == 1.0)) ||
                                   (a[1] == b[1] && (a[1] == 0.0 || a[1] == 1.0));
            if (!same_side) throw DimensionError("Mesh: non-conforming (interior facet with one neighbour)");
        }
    }
}

double Mesh::area(int t) const {
    const auto& tri = triangles_[static_cast<std::size_t>(t)];
    const auto& a = vertices_[static_cast<std::size_t>(tri[0])];
    const auto& b = vertices_[static_cast<std::size_t>(tri[1])];
    const auto& c = vertices_[static_cast<std::size_t>(tri[2])];
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
}

double Mesh::diameter(int t) const {
    const auto& tri = triangles_[static_cast<std::size_t>(t)];
    double h = 0.0;
    for (int e = 0; e < 3; ++e)
        h = std::max(h, dist(vertices_[static_cast<std::size_t>(tri[e])],
                             vertices_[static_cast<std::size_t>(tri[(e + 1) % 3])]));
    return h;
}

double Mesh::facet_length(int f) const {
    const auto& fc = facets_[static_cast<std::size_t>(f)];
    return dist(vertices_[static_cast<std::size_t>(fc.v[0])], vertices_[static_cast<std::size_t>(fc.v[1])]);
}

Point Mesh::facet_normal(int f) const {
    const auto& fc = facets_[static_cast<std::size_t>(f)];
    const auto& a = vertices_[static_cast<std::size_t>(fc.v[0])];
    const auto& b = vertices_[static_cast<std::size_t>(fc.v[1])];
    const double len = dist(a, b);
    Point n{(b[1] - a[1]) / len, -(b[0] - a[0]) / len};
    // orient away from the opposite vertex of the first triangle
    const auto& tri = triangles_[static_cast<std::size_t>(fc.t[0])];
    int opp = tri[0];
    for (int v : tri)
        if (v != fc.v[0] && v != fc.v[1]) opp = v;
    const auto& o = vertices_[static_cast<std::size_t>(opp)];
    if ((o[0] - a[0]) * n[0] + (o[1] - a[1]) * n[1] > 0.0) {
        n[0] = -n[0];
        n[1] = -n[1];
    }
    return n;
}

Eigen::Matrix<double, 3, 2> Mesh::gradients(int t) const {
    const auto& tri = triangles_[static_cast<std::size_t>(t)];
    const auto& p0 = vertices_[static_cast<std::size_t>(tri[0])];
    const auto& p1 = vertices_[static_cast<std::size_t>(tri[1])];
    const auto& p2 = vertices_[static_cast<std::size_t>(tri[2])];
    const double two_area = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    Eigen::Matrix<double, 3, 2> g;
    g(0, 0) = (p1[1] - p2[1]) / two_area;
    g(0, 1) = (p2[0] - p1[0]) / two_area;
    g(1, 0) = (p2[1] - p0[1]) / two_area;
    g(1, 1) = (p0[0] - p2[0]) / two_area;
    g(2, 0) = (p0[1] - p1[1]) / two_area;
    g(2, 1) = (p1[0] - p0[0]) / two_area;
    return g;
}

double Mesh::max_diameter() const {
    double h = 0.0;
    for (Index t = 0; t < n_triangles(); ++t) h = std::max(h, diameter(static_cast<int>(t)));
    return h;
}

double Mesh::min_angle() const {
    double best = std::numbers::pi;
    for (const auto& tri : triangles_) {
        for (int k = 0; k < 3; ++k) {
            const auto& a = vertices_[static_cast<std::size_t>(tri[k])];
            const auto& b = vertices_[static_cast<std::size_t>(tri[(k + 1) % 3])];
            const auto& c = vertices_[static_cast<std::size_t>(tri[(k + 2) % 3])];
            const double ux = b[0] - a[0], uy = b[1] - a[1], vx = c[0] - a[0], vy = c[1] - a[1];
            const double cosang = (ux * vx + uy * vy) / (std::hypot(ux, uy) * std::hypot(vx, vy));
            best = std::min(best, std::acos(std::clamp(cosang, -1.0, 1.0)));
        }
    }
    return best;
}

Mesh initial_mesh(int n) {
    if (n < 1) throw ConfigError("initial_mesh: n must be >= 1");
    std::vector<Point> verts;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) verts.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    // exact boundary coordinates
    for (auto& p : verts)
        for (double& c : p)
            if (std::abs(c - 1.0) < 1e-15) c = 1.0;
    std::vector<Triangle> tris;
    const auto id = [n](int i, int j) { return i + (n + 1) * j; };
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int p00 = id(i, j), p10 = id(i + 1, j), p01 = id(i, j + 1), p11 = id(i + 1, j + 1);
            tris.push_back({p10, p11, p00});
            tris.push_back({p01, p00, p11});
        }
    }
    std::vector<std::array<int, 2>> parents(verts.size(), {-1, -1});
    return Mesh(std::move(verts), std::move(tris), std::move(parents));
}

Mesh refine(const Mesh& mesh, const std::vector<int>& marked, MarkRule rule) {
    if (marked.empty()) return mesh;
    const auto& facets = mesh.facets();
    std::vector<char> edge_marked(facets.size(), 0);
    for (int t : marked) {
        if (t < 0 || t >= mesh.n_triangles()) throw DimensionError("refine: marked triangle out of range");
        const auto& tf = mesh.triangle_facets(t);
        edge_marked[static_cast<std::size_t>(tf[0])] = 1;
        if (rule == MarkRule::Bisect3) {
            edge_marked[static_cast<std::size_t>(tf[1])] = 1;
            edge_marked[static_cast<std::size_t>(tf[2])] = 1;
        }
    }
    // Closure: any triangle with a marked edge must have its refinement edge marked.
    bool changed = true;
    while (changed) {
        changed = false;
        for (Index t = 0; t < mesh.n_triangles(); ++t) {
            const auto& tf = mesh.triangle_facets(static_cast<int>(t));
            if (edge_marked[static_cast<std::size_t>(tf[0])]) continue;
            if (edge_marked[static_cast<std::size_t>(tf[1])] || edge_marked[static_cast<std::size_t>(tf[2])]) {
                edge_marked[static_cast<std::size_t>(tf[0])] = 1;
                changed = true;
            }
        }
    }
    std::vector<Point> verts = mesh.vertices();
    std::vector<std::array<int, 2>> parents = mesh.parents();
    std::vector<int> midpoint(facets.size(), -1);
    for (std::size_t f = 0; f < facets.size(); ++f) {
        if (!edge_marked[f]) continue;
        const auto& a = verts[static_cast<std::size_t>(facets[f].v[0])];
        const auto& b = verts[static_cast<std::size_t>(facets[f].v[1])];
        midpoint[f] = static_cast<int>(verts.size());
        verts.push_back({0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])});
        parents.push_back({std::min(facets[f].v[0], facets[f].v[1]), std::max(facets[f].v[0], facets[f].v[1])});
    }
    std::vector<Triangle> tris;
    tris.reserve(static_cast<std::size_t>(mesh.n_triangles()) * 2);
    for (Index t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles()[static_cast<std::size_t>(t)];
        const auto& tf = mesh.triangle_facets(static_cast<int>(t));
        const int m = midpoint[static_cast<std::size_t>(tf[0])];
        if (m < 0) {
            tris.push_back(tri);
            continue;
        }
        const int v0 = tri[0], v1 = tri[1], v2 = tri[2];
        // child (m; v0, v1), refinement edge v0-v1 = facet opposite v2
        const int m1 = midpoint[static_cast<std::size_t>(tf[2])];
        if (m1 < 0) {
            tris.push_back({m, v0, v1});
        } else {
            tris.push_back({m1, m, v0});
            tris.push_back({m1, v1, m});
        }
        // child (m; v2, v0), refinement edge v2-v0 = facet opposite v1
        const int m2 = midpoint[static_cast<std::size_t>(tf[1])];
        if (m2 < 0) {
            tris.push_back({m, v2, v0});
        } else {
            tris.push_back({m2, m, v2});
            tris.push_back({m2, v0, m});
        }
    }
    Mesh out(std::move(verts), std::move(tris), std::move(parents));
    out.set_generation(mesh.generation() + 1);
    return out;
}

Mesh refine_uniform(const Mesh& mesh, int times) {
    Mesh m = mesh;
    for (int k = 0; k < times; ++k) {
        std::vector<int> all(static_cast<std::size_t>(m.n_triangles()));
        for (std::size_t t = 0; t < all.size(); ++t) all[t] = static_cast<int>(t);
        m = refine(m, all);
    }
    return m;
}

const std::array<std::array<double, 3>, 3>& element_quadrature_barycentric() {
    static const std::array<std::array<double, 3>, 3> pts{{
        {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
        {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
        {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0},
    }};
    return pts;
}

ElementQuadrature element_quadrature(const Mesh& mesh) {
    ElementQuadrature q;
    const auto nt = static_cast<std::size_t>(mesh.n_triangles());
    q.x1.reserve(3 * nt);
    q.x2.reserve(3 * nt);
    q.w.reserve(3 * nt);
    const auto& bary = element_quadrature_barycentric();
    for (std::size_t t = 0; t < nt; ++t) {
        const auto& tri = mesh.triangles()[t];
        const double a = mesh.area(static_cast<int>(t));
        for (const auto& l : bary) {
            double x = 0.0, y = 0.0;
            for (int k = 0; k < 3; ++k) {
                x += l[static_cast<std::size_t>(k)] * mesh.vertices()[static_cast<std::size_t>(tri[k])][0];
                y += l[static_cast<std::size_t>(k)] * mesh.vertices()[static_cast<std::size_t>(tri[k])][1];
            }
            q.x1.push_back(x);
            q.x2.push_back(y);
            q.w.push_back(a / 3.0);
        }
    }
    return q;
}

SparseMatrix assemble_stiffness_integrals(const Mesh& mesh, const Vector& a_int, bool all_vertices) {
    if (a_int.size() != mesh.n_triangles()) throw DimensionError("assemble_stiffness: one value per triangle required");
    const Index n = all_vertices ? mesh.n_vertices() : mesh.n_free();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(9 * mesh.n_triangles()));
    for (Index t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles()[static_cast<std::size_t>(t)];
        const auto g = mesh.gradients(static_cast<int>(t));
        const Eigen::Matrix3d local = a_int(t) * (g * g.transpose());
        for (int i = 0; i < 3; ++i) {
            const int gi = all_vertices ? tri[i] : mesh.free_index(tri[i]);
            if (gi < 0) continue;
            for (int j = 0; j < 3; ++j) {
                const int gj = all_vertices ? tri[j] : mesh.free_index(tri[j]);
                if (gj < 0) continue;
                trip.emplace_back(gi, gj, local(i, j));
            }
        }
    }
    SparseMatrix K(n, n);
    K.setFromTriplets(trip.begin(), trip.end());
    return K;
}

SparseMatrix assemble_stiffness(const Mesh& mesh, const Matrix& a_qp, bool all_vertices) {
    if (a_qp.rows() != mesh.n_triangles() || a_qp.cols() != 3)
        throw DimensionError("assemble_stiffness: coefficient must be given as n_triangles x 3");
    Vector a_int(mesh.n_triangles());
    for (Index t = 0; t < mesh.n_triangles(); ++t) a_int(t) = mesh.area(static_cast<int>(t)) / 3.0 * a_qp.row(t).sum();
    return assemble_stiffness_integrals(mesh, a_int, all_vertices);
}

SparseMatrix laplace_stiffness(const Mesh& mesh, bool all_vertices) {
    Vector a_int(mesh.n_triangles());
    for (Index t = 0; t < mesh.n_triangles(); ++t) a_int(t) = mesh.area(static_cast<int>(t));
    return assemble_stiffness_integrals(mesh, a_int, all_vertices);
}

Vector assemble_load(const Mesh& mesh, const ScalarField& f, bool all_vertices) {
    const Index n = all_vertices ? mesh.n_vertices() : mesh.n_free();
    Vector b = Vector::Zero(n);
    const auto q = element_quadrature(mesh);
    const auto& bary = element_quadrature_barycentric();
    for (Index t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles()[static_cast<std::size_t>(t)];
        for (int k = 0; k < 3; ++k) {
            const auto p = static_cast<std::size_t>(3 * t + k);
            const double fw = f(q.x1[p], q.x2[p]) * q.w[p];
            for (int i = 0; i < 3; ++i) {
                const int gi = all_vertices ? tri[i] : mesh.free_index(tri[i]);
                if (gi >= 0) b(gi) += fw * bary[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
            }
        }
    }
    return b;
}

Vector expand_free(const Mesh& mesh, const Vector& free_values) {
    if (free_values.size() != mesh.n_free()) throw DimensionError("expand_free: length mismatch");
    Vector full = Vector::Zero(mesh.n_vertices());
    for (Index i = 0; i < mesh.n_free(); ++i) full(mesh.free_vertices()[static_cast<std::size_t>(i)]) = free_values(i);
    return full;
}

Vector restrict_free(const Mesh& mesh, const Vector& vertex_values) {
    if (vertex_values.size() != mesh.n_vertices()) throw DimensionError("restrict_free: length mismatch");
    Vector out(mesh.n_free());
    for (Index i = 0; i < mesh.n_free(); ++i) out(i) = vertex_values(mesh.free_vertices()[static_cast<std::size_t>(i)]);
    return out;
}

Matrix element_gradients(const Mesh& mesh, const Vector& vertex_values) {
    if (vertex_values.size() != mesh.n_vertices()) throw DimensionError("element_gradients: length mismatch");
    Matrix g(mesh.n_triangles(), 2);
    for (Index t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles()[static_cast<std::size_t>(t)];
        const auto G = mesh.gradients(static_cast<int>(t));
        Eigen::RowVector2d s = Eigen::RowVector2d::Zero();
        for (int i = 0; i < 3; ++i) s += vertex_values(tri[i]) * G.row(i);
        g.row(t) = s;
    }
    return g;
}

Vector facet_jumps(const Mesh& mesh, const Matrix& flux) {
    if (flux.rows() != mesh.n_triangles() || flux.cols() != 2) throw DimensionError("facet_jumps: flux must be n_triangles x 2");
    const auto nf = static_cast<Index>(mesh.facets().size());
    Vector j = Vector::Zero(nf);
    for (Index f = 0; f < nf; ++f) {
        const auto& fc = mesh.facets()[static_cast<std::size_t>(f)];
        if (fc.boundary()) continue;
        const Point n = mesh.facet_normal(static_cast<int>(f));
        const auto t0 = fc.t[0], t1 = fc.t[1];
        j(f) = (flux(t0, 0) - flux(t1, 0)) * n[0] + (flux(t0, 1) - flux(t1, 1)) * n[1];
    }
    return j;
}

double h1_seminorm(const Mesh& mesh, const Vector& free_values) {
    return h1_seminorm_full(mesh, expand_free(mesh, free_values));
}

double h1_seminorm_full(const Mesh& mesh, const Vector& vertex_values) {
    const Matrix g = element_gradients(mesh, vertex_values);
    double s = 0.0;
    for (Index t = 0; t < mesh.n_triangles(); ++t) s += mesh.area(static_cast<int>(t)) * g.row(t).squaredNorm();
    return std::sqrt(s);
}

Vector prolongate(const Mesh& fine, const Vector& coarse_vertex_values) {
    const Index nc = coarse_vertex_values.size();
    if (nc > fine.n_vertices()) throw DimensionError("prolongate: coarse vector longer than fine vertex set");
    Vector out(fine.n_vertices());
    out.head(nc) = coarse_vertex_values;
    for (Index v = nc; v < fine.n_vertices(); ++v) {
        const auto& p = fine.parents()[static_cast<std::size_t>(v)];
        if (p[0] < 0 || p[0] >= v || p[1] >= v) throw DimensionError("prolongate: mesh is not a refinement of the input");
        out(v) = 0.5 * (out(p[0]) + out(p[1]));
    }
    return out;
}

Vector interpolate(const Mesh& mesh, const ScalarField& f) {
    Vector v(mesh.n_vertices());
    for (Index i = 0; i < mesh.n_vertices(); ++i) {
        const auto& p = mesh.vertices()[static_cast<std::size_t>(i)];
        v(i) = f(p[0], p[1]);
    }
    return v;
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
    out << "mesh " << mesh.n_vertices() << ' ' << mesh.n_triangles() << '\n';
    out << std::setprecision(17);
    for (const auto& p : mesh.vertices()) out << p[0] << ' ' << p[1] << '\n';
    for (const auto& t : mesh.triangles()) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

} // namespace ttasgfem::fem
