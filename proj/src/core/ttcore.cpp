#include "ttcore.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

#include <Eigen/QR>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>

namespace ttasgfem::tt {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw DimensionError(msg);
}

/// Thin QR of m (rows >= 1). Returns Q (rows x k) and R (k x cols) with
/// k = min(rows, cols).
void thin_qr(const Matrix& m, Matrix& q, Matrix& r) {
    const Index k = std::min(m.rows(), m.cols());
    Eigen::HouseholderQR<Matrix> qr(m);
    q = qr.householderQ() * Matrix::Identity(m.rows(), k);
    r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
}

/// Number of singular values kept: the smallest r whose discarded tail has
/// Frobenius norm <= delta, capped by max_rank and by numerical rank.
Index truncation_rank(const Vector& s, double delta, Index max_rank) {
    const Index n = s.size();
    if (n == 0) return 0;
    const double floor = s(0) * std::numeric_limits<double>::epsilon() * static_cast<double>(n);
    Index r = n;
    double tail = 0.0;
    while (r > 1) {
        const double next = tail + s(r - 1) * s(r - 1);
        if (std::sqrt(next) > delta && s(r - 1) > floor) break;
        tail = next;
        --r;
    }
    if (max_rank > 0) r = std::min(r, max_rank);
    return std::max<Index>(r, 1);
}

} // namespace

// ---------------------------------------------------------------------------
// Core
// ---------------------------------------------------------------------------

Core::Core(Index left_rank, Index mode_size, Index right_rank)
    : rl_(left_rank), n_(mode_size), rr_(right_rank),
      data_(static_cast<std::size_t>(left_rank * mode_size * right_rank), 0.0) {
    require(left_rank >= 1 && mode_size >= 1 && right_rank >= 1, "Core: all sizes must be positive");
}

Matrix Core::slice(Index i) const {
    Matrix m(rl_, rr_);
    for (Index b = 0; b < rr_; ++b)
        for (Index a = 0; a < rl_; ++a) m(a, b) = (*this)(a, i, b);
    return m;
}

void Core::set_slice(Index i, const Matrix& m) {
    require(m.rows() == rl_ && m.cols() == rr_, "Core::set_slice: shape mismatch");
    for (Index b = 0; b < rr_; ++b)
        for (Index a = 0; a < rl_; ++a) (*this)(a, i, b) = m(a, b);
}

Core Core::from_left_unfolding(const Matrix& m, Index left_rank, Index mode_size) {
    require(m.rows() == left_rank * mode_size, "Core::from_left_unfolding: row count mismatch");
    Core c(left_rank, mode_size, m.cols());
    c.left_unfolding() = m;
    return c;
}

Core Core::from_right_unfolding(const Matrix& m, Index mode_size, Index right_rank) {
    require(m.cols() == mode_size * right_rank, "Core::from_right_unfolding: column count mismatch");
    Core c(m.rows(), mode_size, right_rank);
    c.right_unfolding() = m;
    return c;
}

// ---------------------------------------------------------------------------
// TTTensor
// ---------------------------------------------------------------------------

TTTensor::TTTensor(std::vector<Core> cores) : cores_(std::move(cores)) {
    require(!cores_.empty(), "TTTensor: need at least one core");
    require(cores_.front().left_rank() == 1, "TTTensor: first core must have left rank 1");
    require(cores_.back().right_rank() == 1, "TTTensor: last core must have right rank 1");
    for (std::size_t k = 0; k + 1 < cores_.size(); ++k)
        require(cores_[k].right_rank() == cores_[k + 1].left_rank(), "TTTensor: rank mismatch between cores");
}

TTTensor TTTensor::zeros(std::span<const Index> dims, std::span<const Index> ranks) {
    require(!dims.empty(), "TTTensor::zeros: empty dims");
    require(ranks.size() == dims.size() + 1, "TTTensor::zeros: ranks must have length order+1");
    std::vector<Core> cores;
    cores.reserve(dims.size());
    for (std::size_t k = 0; k < dims.size(); ++k) cores.emplace_back(ranks[k], dims[k], ranks[k + 1]);
    return TTTensor(std::move(cores));
}

TTTensor TTTensor::random(std::span<const Index> dims, std::span<const Index> ranks, std::mt19937_64& rng) {
    TTTensor t = zeros(dims, ranks);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& c : t.cores_)
        for (double& v : c.data()) v = dist(rng);
    return t;
}

TTTensor TTTensor::rank_one(const std::vector<Vector>& factors) {
    require(!factors.empty(), "TTTensor::rank_one: no factors");
    std::vector<Core> cores;
    for (const auto& f : factors) {
        Core c(1, f.size(), 1);
        for (Index i = 0; i < f.size(); ++i) c(0, i, 0) = f(i);
        cores.push_back(std::move(c));
    }
    return TTTensor(std::move(cores));
}

TTTensor TTTensor::from_dense(const Vector& values, std::span<const Index> dims, double rel_tol, Index max_rank) {
    require(!dims.empty(), "TTTensor::from_dense: empty dims");
    Index total = 1;
    for (Index n : dims) total *= n;
    require(values.size() == total, "TTTensor::from_dense: size mismatch");
    const std::size_t d = dims.size();
    const double delta = d > 1 ? rel_tol * values.norm() / std::sqrt(static_cast<double>(d - 1)) : 0.0;

    // Peel cores off the front: the remainder is stored as r x (rest), first
    // index fastest, so the next unfolding is a column-major reshape.
    std::vector<Core> cores;
    Matrix rest = Eigen::Map<const Matrix>(values.data(), 1, total);
    Index r = 1;
    for (std::size_t k = 0; k + 1 < d; ++k) {
        const Index n = dims[k];
        const Index cols = rest.size() / (r * n);
        Matrix unf = Eigen::Map<const Matrix>(rest.data(), r * n, cols);
        Eigen::BDCSVD<Matrix> svd(unf, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Index rk = truncation_rank(svd.singularValues(), delta, max_rank);
        cores.push_back(Core::from_left_unfolding(svd.matrixU().leftCols(rk), r, n));
        rest = svd.singularValues().head(rk).asDiagonal() * svd.matrixV().leftCols(rk).transpose();
        r = rk;
    }
    cores.push_back(Core::from_right_unfolding(rest, dims[d - 1], 1));
    return TTTensor(std::move(cores));
}

std::vector<Index> TTTensor::dims() const {
    std::vector<Index> d;
    d.reserve(cores_.size());
    for (const auto& c : cores_) d.push_back(c.mode_size());
    return d;
}

std::vector<Index> TTTensor::ranks() const {
    std::vector<Index> r;
    r.reserve(cores_.size() + 1);
    r.push_back(1);
    for (const auto& c : cores_) r.push_back(c.right_rank());
    return r;
}

Index TTTensor::max_rank() const {
    Index m = 1;
    for (const auto& c : cores_) m = std::max(m, c.right_rank());
    return m;
}

Index TTTensor::full_size() const {
    Index s = 1;
    for (const auto& c : cores_) s *= c.mode_size();
    return s;
}

double TTTensor::eval(std::span<const Index> idx) const {
    require(idx.size() == cores_.size(), "TTTensor::eval: index length mismatch");
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Ones(1);
    for (std::size_t k = 0; k < cores_.size(); ++k) {
        require(idx[k] >= 0 && idx[k] < cores_[k].mode_size(), "TTTensor::eval: index out of range");
        v = v * cores_[k].slice(idx[k]);
    }
    return v(0);
}

Vector TTTensor::to_dense() const {
    // Accumulate left to right: acc is (prefix size) x r_k.
    Matrix acc = Matrix::Ones(1, 1);
    for (const auto& c : cores_) {
        const Index p = acc.rows();
        const Index n = c.mode_size();
        Matrix next(p * n, c.right_rank());
        for (Index i = 0; i < n; ++i) {
            const Matrix prod = acc * c.slice(i);
            for (Index b = 0; b < c.right_rank(); ++b)
                next.col(b).segment(i * p, p) = prod.col(b);
        }
        acc = std::move(next);
    }
    return acc.col(0);
}

// ---------------------------------------------------------------------------
// Arithmetic
// ---------------------------------------------------------------------------

TTTensor add(const TTTensor& x, const TTTensor& y) {
    require(x.dims() == y.dims(), "add: dimension mismatch");
    const std::size_t d = x.order();
    if (d == 1) {
        Core c(1, x.core(0).mode_size(), 1);
        for (Index i = 0; i < c.mode_size(); ++i) c(0, i, 0) = x.core(0)(0, i, 0) + y.core(0)(0, i, 0);
        return TTTensor({c});
    }
    std::vector<Core> cores;
    cores.reserve(d);
    for (std::size_t k = 0; k < d; ++k) {
        const Core& a = x.core(k);
        const Core& b = y.core(k);
        const bool first = k == 0;
        const bool last = k + 1 == d;
        const Index rl = first ? 1 : a.left_rank() + b.left_rank();
        const Index rr = last ? 1 : a.right_rank() + b.right_rank();
        const Index n = a.mode_size();
        Core c(rl, n, rr);
        const Index ol = first ? 0 : a.left_rank();
        const Index orr = last ? 0 : a.right_rank();
        for (Index i = 0; i < n; ++i) {
            for (Index q = 0; q < a.right_rank(); ++q)
                for (Index p = 0; p < a.left_rank(); ++p) c(p, i, q) = a(p, i, q);
            for (Index q = 0; q < b.right_rank(); ++q)
                for (Index p = 0; p < b.left_rank(); ++p) c(ol + p, i, orr + q) = b(p, i, q);
        }
        cores.push_back(std::move(c));
    }
    return TTTensor(std::move(cores));
}

TTTensor scale(const TTTensor& x, double alpha) {
    TTTensor y = x;
    for (double& v : y.core(0).data()) v *= alpha;
    return y;
}

TTTensor subtract(const TTTensor& x, const TTTensor& y) { return add(x, scale(y, -1.0)); }

double dot(const TTTensor& x, const TTTensor& y) {
    require(x.dims() == y.dims(), "dot: dimension mismatch");
    // env is r_x x r_y
    Matrix env = Matrix::Ones(1, 1);
    for (std::size_t k = 0; k < x.order(); ++k) {
        const Core& a = x.core(k);
        const Core& b = y.core(k);
        Matrix next = Matrix::Zero(a.right_rank(), b.right_rank());
        for (Index i = 0; i < a.mode_size(); ++i) next.noalias() += a.slice(i).transpose() * env * b.slice(i);
        env = std::move(next);
    }
    return env(0, 0);
}

TTTensor right_orthogonalize(const TTTensor& x) {
    std::vector<Core> cores = x.cores();
    for (std::size_t k = cores.size() - 1; k >= 1; --k) {
        Core& c = cores[k];
        const Index n = c.mode_size();
        const Index rr = c.right_rank();
        Matrix q, r;
        thin_qr(c.right_unfolding().transpose(), q, r); // (n rr) x k
        c = Core::from_right_unfolding(q.transpose(), n, rr);
        // absorb R^T into the previous core
        Core& p = cores[k - 1];
        const Matrix prev = p.left_unfolding() * r.transpose();
        p = Core::from_left_unfolding(prev, p.left_rank(), p.mode_size());
    }
    return TTTensor(std::move(cores));
}

TTTensor left_orthogonalize(const TTTensor& x) {
    std::vector<Core> cores = x.cores();
    for (std::size_t k = 0; k + 1 < cores.size(); ++k) {
        Core& c = cores[k];
        Matrix q, r;
        thin_qr(c.left_unfolding(), q, r);
        c = Core::from_left_unfolding(q, c.left_rank(), c.mode_size());
        Core& nx = cores[k + 1];
        const Matrix next = r * nx.right_unfolding();
        nx = Core::from_right_unfolding(next, nx.mode_size(), nx.right_rank());
    }
    return TTTensor(std::move(cores));
}

double norm(const TTTensor& x) {
    const TTTensor y = right_orthogonalize(x);
    const auto& d = y.core(0).data();
    return Eigen::Map<const Vector>(d.data(), static_cast<Index>(d.size())).norm();
}

TTTensor round(const TTTensor& x, double rel_tol, Index max_rank) {
    if (rel_tol < 0.0) throw ConfigError("round: negative tolerance");
    std::vector<Core> cores = right_orthogonalize(x).cores();
    const std::size_t d = cores.size();
    if (d == 1) return TTTensor(std::move(cores));
    const auto& d0 = cores[0].data();
    const double nrm = Eigen::Map<const Vector>(d0.data(), static_cast<Index>(d0.size())).norm();
    const double delta = rel_tol * nrm / std::sqrt(static_cast<double>(d - 1));
    for (std::size_t k = 0; k + 1 < d; ++k) {
        Core& c = cores[k];
        Eigen::BDCSVD<Matrix> svd(c.left_unfolding(), Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Index rk = truncation_rank(svd.singularValues(), delta, max_rank);
        const Matrix u = svd.matrixU().leftCols(rk);
        const Matrix sv = svd.singularValues().head(rk).asDiagonal() * svd.matrixV().leftCols(rk).transpose();
        c = Core::from_left_unfolding(u, c.left_rank(), c.mode_size());
        Core& nx = cores[k + 1];
        nx = Core::from_right_unfolding(sv * nx.right_unfolding(), nx.mode_size(), nx.right_rank());
    }
    return TTTensor(std::move(cores));
}

TTTensor mask_hadamard(const TTTensor& x, const std::vector<std::vector<double>>& weights) {
    require(weights.size() == x.order(), "mask_hadamard: one weight vector per dimension required");
    TTTensor y = x;
    for (std::size_t k = 0; k < y.order(); ++k) {
        const auto& w = weights[k];
        if (w.empty()) continue;
        Core& c = y.core(k);
        require(static_cast<Index>(w.size()) == c.mode_size(), "mask_hadamard: weight length mismatch");
        for (Index b = 0; b < c.right_rank(); ++b)
            for (Index i = 0; i < c.mode_size(); ++i)
                for (Index a = 0; a < c.left_rank(); ++a) c(a, i, b) *= w[static_cast<std::size_t>(i)];
    }
    return y;
}

std::int64_t tt_dofs(std::span<const Index> dims, std::span<const Index> ranks) {
    require(ranks.size() == dims.size() + 1, "tt_dofs: ranks must have length order+1");
    const std::size_t d = dims.size();
    if (d == 1) return dims[0];
    std::int64_t n = static_cast<std::int64_t>(dims[0]) * ranks[1];
    for (std::size_t k = 1; k + 1 < d; ++k) {
        n += static_cast<std::int64_t>(ranks[k]) * dims[k] * ranks[k + 1] -
             static_cast<std::int64_t>(ranks[k + 1]) * ranks[k + 1];
    }
    n += static_cast<std::int64_t>(ranks[d - 1]) * dims[d - 1];
    return n;
}

std::int64_t tt_dofs(const TTTensor& x) {
    const auto d = x.dims();
    const auto r = x.ranks();
    return tt_dofs(d, r);
}

// ---------------------------------------------------------------------------
// OpCore / TTOperator
// ---------------------------------------------------------------------------

OpCore::OpCore(Index left_rank, Index rows, Index cols, Index right_rank)
    : sl_(left_rank), rows_(rows), cols_(cols), sr_(right_rank),
      data_(static_cast<std::size_t>(left_rank * rows * cols * right_rank), 0.0) {
    require(left_rank >= 1 && rows >= 1 && cols >= 1 && right_rank >= 1, "OpCore: all sizes must be positive");
}

OpCore::OpCore(Index left_rank, Index right_rank, std::vector<SparseMatrix> bank)
    : sl_(left_rank), sr_(right_rank), sparse_(true), bank_(std::move(bank)) {
    require(left_rank >= 1 && right_rank >= 1, "OpCore: ranks must be positive");
    require(static_cast<Index>(bank_.size()) == left_rank * right_rank, "OpCore: bank size must be s_l * s_r");
    rows_ = bank_.front().rows();
    cols_ = bank_.front().cols();
    for (const auto& m : bank_)
        require(m.rows() == rows_ && m.cols() == cols_, "OpCore: bank matrices must share a shape");
}

double& OpCore::operator()(Index a, Index i, Index j, Index b) {
    if (sparse_) throw DimensionError("OpCore: element access on a sparse core");
    return data_[static_cast<std::size_t>(a + sl_ * (i + rows_ * (j + cols_ * b)))];
}

double OpCore::operator()(Index a, Index i, Index j, Index b) const {
    if (sparse_) return bank_[static_cast<std::size_t>(a + sl_ * b)].coeff(i, j);
    return data_[static_cast<std::size_t>(a + sl_ * (i + rows_ * (j + cols_ * b)))];
}

Matrix OpCore::block(Index a, Index b) const {
    if (sparse_) return Matrix(bank_[static_cast<std::size_t>(a + sl_ * b)]);
    Matrix m(rows_, cols_);
    for (Index j = 0; j < cols_; ++j)
        for (Index i = 0; i < rows_; ++i) m(i, j) = (*this)(a, i, j, b);
    return m;
}

const SparseMatrix& OpCore::sparse_block(Index a, Index b) const {
    if (!sparse_) throw DimensionError("OpCore::sparse_block: dense core");
    return bank_[static_cast<std::size_t>(a + sl_ * b)];
}

Matrix OpCore::apply_block(Index a, Index b, const Eigen::Ref<const Matrix>& x) const {
    require(x.rows() == cols_, "OpCore::apply_block: shape mismatch");
    if (sparse_) return bank_[static_cast<std::size_t>(a + sl_ * b)] * x;
    return block(a, b) * x;
}

TTOperator::TTOperator(std::vector<OpCore> cores) : cores_(std::move(cores)) {
    require(!cores_.empty(), "TTOperator: need at least one core");
    require(cores_.front().left_rank() == 1 && cores_.back().right_rank() == 1,
            "TTOperator: boundary ranks must be 1");
    for (std::size_t k = 0; k + 1 < cores_.size(); ++k)
        require(cores_[k].right_rank() == cores_[k + 1].left_rank(), "TTOperator: rank mismatch between cores");
}

TTOperator TTOperator::identity(std::span<const Index> dims) {
    std::vector<OpCore> cores;
    for (Index n : dims) {
        OpCore c(1, n, n, 1);
        for (Index i = 0; i < n; ++i) c(0, i, i, 0) = 1.0;
        cores.push_back(std::move(c));
    }
    return TTOperator(std::move(cores));
}

TTOperator TTOperator::rank_one(const std::vector<Matrix>& factors) {
    std::vector<OpCore> cores;
    for (const auto& f : factors) {
        OpCore c(1, f.rows(), f.cols(), 1);
        for (Index j = 0; j < f.cols(); ++j)
            for (Index i = 0; i < f.rows(); ++i) c(0, i, j, 0) = f(i, j);
        cores.push_back(std::move(c));
    }
    return TTOperator(std::move(cores));
}

std::vector<Index> TTOperator::row_dims() const {
    std::vector<Index> d;
    for (const auto& c : cores_) d.push_back(c.rows());
    return d;
}

std::vector<Index> TTOperator::col_dims() const {
    std::vector<Index> d;
    for (const auto& c : cores_) d.push_back(c.cols());
    return d;
}

std::vector<Index> TTOperator::ranks() const {
    std::vector<Index> r{1};
    for (const auto& c : cores_) r.push_back(c.right_rank());
    return r;
}

Matrix TTOperator::to_dense() const {
    // acc holds, per right rank index b, the (rows-prefix x cols-prefix) block.
    std::vector<Matrix> acc{Matrix::Ones(1, 1)};
    for (const auto& c : cores_) {
        const Index pr = acc.front().rows();
        const Index pc = acc.front().cols();
        std::vector<Matrix> next(static_cast<std::size_t>(c.right_rank()),
                                 Matrix::Zero(pr * c.rows(), pc * c.cols()));
        for (Index b = 0; b < c.right_rank(); ++b) {
            for (Index a = 0; a < c.left_rank(); ++a) {
                const Matrix blk = c.block(a, b);
                // Kronecker with the new mode as the slow index.
                for (Index j = 0; j < c.cols(); ++j)
                    for (Index i = 0; i < c.rows(); ++i)
                        if (blk(i, j) != 0.0)
                            next[static_cast<std::size_t>(b)].block(i * pr, j * pc, pr, pc) +=
                                blk(i, j) * acc[static_cast<std::size_t>(a)];
            }
        }
        acc = std::move(next);
    }
    return acc.front();
}

TTTensor mpo_apply(const TTOperator& op, const TTTensor& x) {
    require(op.order() == x.order(), "mpo_apply: order mismatch");
    std::vector<Core> cores;
    cores.reserve(x.order());
    for (std::size_t k = 0; k < x.order(); ++k) {
        const OpCore& o = op.core(k);
        const Core& c = x.core(k);
        require(o.cols() == c.mode_size(), "mpo_apply: mode size mismatch");
        const Index sl = o.left_rank(), sr = o.right_rank();
        const Index xl = c.left_rank(), xr = c.right_rank();
        const Index n = c.mode_size();
        // X as n x (xl xr), column alpha + xl beta.
        Matrix xm(n, xl * xr);
        for (Index be = 0; be < xr; ++be)
            for (Index i = 0; i < n; ++i)
                for (Index al = 0; al < xl; ++al) xm(i, al + xl * be) = c(al, i, be);
        Core y(sl * xl, o.rows(), sr * xr);
        for (Index b = 0; b < sr; ++b) {
            for (Index a = 0; a < sl; ++a) {
                const Matrix ym = o.apply_block(a, b, xm);
                for (Index be = 0; be < xr; ++be)
                    for (Index i = 0; i < o.rows(); ++i)
                        for (Index al = 0; al < xl; ++al) y(a + sl * al, i, b + sr * be) = ym(i, al + xl * be);
            }
        }
        cores.push_back(std::move(y));
    }
    return TTTensor(std::move(cores));
}

std::int64_t op_dofs(std::span<const Index> dims, std::span<const Index> ranks) {
    require(ranks.size() == dims.size() + 1, "op_dofs: ranks must have length order+1");
    const std::size_t d = dims.size();
    auto sq = [](Index v) { return static_cast<std::int64_t>(v) * v; };
    if (d == 1) return sq(dims[0]);
    std::int64_t n = sq(dims[0]) * ranks[1] - sq(ranks[1]);
    for (std::size_t k = 1; k + 1 < d; ++k) n += ranks[k] * sq(dims[k]) * ranks[k + 1] - sq(ranks[k + 1]);
    n += ranks[d - 1] * sq(dims[d - 1]);
    return n;
}

std::int64_t op_dofs(const TTOperator& op) {
    const auto d = op.row_dims();
    const auto r = op.ranks();
    return op_dofs(d, r);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

std::vector<double> row_major(const Core& c) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(c.size()));
    for (Index a = 0; a < c.left_rank(); ++a)
        for (Index i = 0; i < c.mode_size(); ++i)
            for (Index b = 0; b < c.right_rank(); ++b) out.push_back(c(a, i, b));
    return out;
}

Core from_row_major(Index rl, Index n, Index rr, const std::vector<double>& v) {
    require(static_cast<Index>(v.size()) == rl * n * rr, "deserialize: core data length mismatch");
    Core c(rl, n, rr);
    std::size_t p = 0;
    for (Index a = 0; a < rl; ++a)
        for (Index i = 0; i < n; ++i)
            for (Index b = 0; b < rr; ++b) c(a, i, b) = v[p++];
    return c;
}

constexpr char kMagic[4] = {'T', 'T', 'T', '1'};

} // namespace

std::string to_json(const TTTensor& x) {
    nlohmann::json j;
    j["format"] = "tt-tensor";
    j["dims"] = x.dims();
    j["ranks"] = x.ranks();
    nlohmann::json cores = nlohmann::json::array();
    for (const auto& c : x.cores()) {
        cores.push_back({{"shape", {c.left_rank(), c.mode_size(), c.right_rank()}}, {"data", row_major(c)}});
    }
    j["cores"] = std::move(cores);
    return j.dump();
}

TTTensor tensor_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("tensor_from_json: ") + e.what());
    }
    if (j.value("format", std::string()) != "tt-tensor") throw ConfigError("tensor_from_json: not a tt-tensor document");
    std::vector<Core> cores;
    for (const auto& cj : j.at("cores")) {
        const auto shape = cj.at("shape").get<std::vector<Index>>();
        require(shape.size() == 3, "tensor_from_json: core shape must have three entries");
        cores.push_back(from_row_major(shape[0], shape[1], shape[2], cj.at("data").get<std::vector<double>>()));
    }
    return TTTensor(std::move(cores));
}

void write_binary(std::ostream& out, const TTTensor& x) {
    out.write(kMagic, 4);
    const auto put = [&out](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
    put(x.order());
    for (const auto& c : x.cores()) {
        put(static_cast<std::uint64_t>(c.left_rank()));
        put(static_cast<std::uint64_t>(c.mode_size()));
        put(static_cast<std::uint64_t>(c.right_rank()));
        const auto v = row_major(c);
        out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
    if (!out) throw Error("write_binary: stream failure");
}

TTTensor read_binary(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw ConfigError("read_binary: bad magic");
    const auto get = [&in]() {
        std::uint64_t v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!in) throw ConfigError("read_binary: truncated stream");
        return v;
    };
    const std::uint64_t order = get();
    if (order == 0 || order > 100000) throw ConfigError("read_binary: implausible order");
    std::vector<Core> cores;
    for (std::uint64_t k = 0; k < order; ++k) {
        const auto rl = static_cast<Index>(get());
        const auto n = static_cast<Index>(get());
        const auto rr = static_cast<Index>(get());
        if (rl < 1 || n < 1 || rr < 1 || rl * n * rr > (Index{1} << 32)) throw ConfigError("read_binary: bad core shape");
        std::vector<double> v(static_cast<std::size_t>(rl * n * rr));
        in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
        if (!in) throw ConfigError("read_binary: truncated stream");
        cores.push_back(from_row_major(rl, n, rr, v));
    }
    return TTTensor(std::move(cores));
}

} // namespace ttasgfem::tt
