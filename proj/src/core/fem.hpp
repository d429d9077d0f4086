#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <vector>

#include "common.hpp"

/// Conforming P1 finite elements on the unit square with homogeneous
/// Dirichlet conditions, and newest-vertex bisection.
///
/// A triangle is stored as (v0; v1, v2) in counter-clockwise order; v0 is the
/// newest vertex and v1-v2 the refinement edge. Bisection at the midpoint m
/// of v1-v2 yields (m; v0, v1) and (m; v2, v0). Vertex ids are append-only,
/// so a coarse mesh's vertices are a prefix of every refinement.
namespace ttasgfem::fem {

using Point = std::array<double, 2>;
using Triangle = std::array<int, 3>;

struct Facet {
    std::array<int, 2> v{};
    std::array<int, 2> t{-1, -1}; ///< t[1] = -1 on the boundary
    [[nodiscard]] bool boundary() const { return t[1] < 0; }
};

class Mesh {
public:
    Mesh() = default;
    Mesh(std::vector<Point> vertices, std::vector<Triangle> triangles, std::vector<std::array<int, 2>> parents);

    [[nodiscard]] const std::vector<Point>& vertices() const { return vertices_; }
    [[nodiscard]] const std::vector<Triangle>& triangles() const { return triangles_; }
    [[nodiscard]] const std::vector<Facet>& facets() const { return facets_; }
    /// Parent vertices of a bisection midpoint; {-1, -1} for initial vertices.
    [[nodiscard]] const std::vector<std::array<int, 2>>& parents() const { return parents_; }
    [[nodiscard]] int generation() const { return generation_; }

    [[nodiscard]] Index n_vertices() const { return static_cast<Index>(vertices_.size()); }
    [[nodiscard]] Index n_triangles() const { return static_cast<Index>(triangles_.size()); }
    [[nodiscard]] Index n_free() const { return static_cast<Index>(free_vertices_.size()); }
    [[nodiscard]] bool is_boundary_vertex(int v) const { return free_index_[static_cast<std::size_t>(v)] < 0; }
    /// Free (interior) dof index of a vertex, -1 on the boundary.
    [[nodiscard]] int free_index(int v) const { return free_index_[static_cast<std::size_t>(v)]; }
    [[nodiscard]] const std::vector<int>& free_vertices() const { return free_vertices_; }
    /// Facet ids of triangle t, ordered as the edges opposite v0, v1, v2.
    [[nodiscard]] const std::array<int, 3>& triangle_facets(int t) const { return tri_facets_[static_cast<std::size_t>(t)]; }

    [[nodiscard]] double area(int t) const;
    /// Longest edge length.
    [[nodiscard]] double diameter(int t) const;
    [[nodiscard]] double facet_length(int f) const;
    /// Unit normal of facet f pointing out of its first triangle.
    [[nodiscard]] Point facet_normal(int f) const;
    /// Gradients of the three barycentric functions (rows follow local vertices).
    [[nodiscard]] Eigen::Matrix<double, 3, 2> gradients(int t) const;
    [[nodiscard]] double max_diameter() const;
    [[nodiscard]] double min_angle() const;

    void set_generation(int g) { generation_ = g; }

private:
    void build_topology();

    std::vector<Point> vertices_;
    std::vector<Triangle> triangles_;
    std::vector<std::array<int, 2>> parents_;
    std::vector<Facet> facets_;
    std::vector<std::array<int, 3>> tri_facets_;
    std::vector<int> free_index_;
    std::vector<int> free_vertices_;
    int generation_ = 0;
};

/// n x n grid of the unit square, two triangles per cell, refinement edges on
/// the diagonals.
Mesh initial_mesh(int n);

/// How a marked triangle is split before closure.
enum class MarkRule {
    Bisect1, ///< refinement edge only: two children
    Bisect3  ///< all three edges: four children
};

/// Newest-vertex bisection of the marked triangles plus conforming closure.
Mesh refine(const Mesh& mesh, const std::vector<int>& marked, MarkRule rule = MarkRule::Bisect1);
Mesh refine_uniform(const Mesh& mesh, int times = 1);

/// Element quadrature: three interior points per triangle, order 2, equal
/// weights |T|/3. Points are returned triangle-major (3 t + q).
struct ElementQuadrature {
    std::vector<double> x1;
    std::vector<double> x2;
    std::vector<double> w;
};
ElementQuadrature element_quadrature(const Mesh& mesh);

/// Local barycentric coordinates of the element quadrature points.
const std::array<std::array<double, 3>, 3>& element_quadrature_barycentric();

/// Stiffness matrix int a grad(phi_i) . grad(phi_j) with a given at the
/// element quadrature points (n_triangles x 3). Restricted to free vertices
/// unless all_vertices is set.
SparseMatrix assemble_stiffness(const Mesh& mesh, const Matrix& a_qp, bool all_vertices = false);
/// Same with per-element integrals int_T a.
SparseMatrix assemble_stiffness_integrals(const Mesh& mesh, const Vector& a_int, bool all_vertices = false);
/// Unit-coefficient stiffness.
SparseMatrix laplace_stiffness(const Mesh& mesh, bool all_vertices = false);

using ScalarField = std::function<double(double, double)>;

/// int f phi_i by the element quadrature.
Vector assemble_load(const Mesh& mesh, const ScalarField& f, bool all_vertices = false);

/// Free-dof vector to a full vertex vector with zero boundary values.
Vector expand_free(const Mesh& mesh, const Vector& free_values);
/// Full vertex vector to free dofs.
Vector restrict_free(const Mesh& mesh, const Vector& vertex_values);

/// Per-element gradient (n_triangles x 2) of a P1 function given at all vertices.
Matrix element_gradients(const Mesh& mesh, const Vector& vertex_values);

/// Normal jumps [[s]] . n_F = s|_{T1} . n_F - s|_{T2} . n_F of a piecewise
/// constant flux (n_triangles x 2) on interior facets; zero on the boundary.
Vector facet_jumps(const Mesh& mesh, const Matrix& flux);

/// sqrt(w^T K_1 w) for free-dof values w.
double h1_seminorm(const Mesh& mesh, const Vector& free_values);
/// Same for a function given at all vertices.
double h1_seminorm_full(const Mesh& mesh, const Vector& vertex_values);

/// Interpolates a P1 function (all vertices) from a coarse mesh onto a mesh
/// obtained from it by bisection. Coarse vertices must be a prefix of fine.
Vector prolongate(const Mesh& fine, const Vector& coarse_vertex_values);

/// Nodal interpolant of a scalar field (all vertices).
Vector interpolate(const Mesh& mesh, const ScalarField& f);

/// Plain-text listing: header line, vertices, triangles.
void write_mesh(std::ostream& out, const Mesh& mesh);

} // namespace ttasgfem::fem
