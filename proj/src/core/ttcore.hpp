#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "common.hpp"

/// Tensor trains and matrix product operators.
///
/// A core of shape (r_l, n, r_r) is stored column-major with the left rank
/// index fastest: entry (a, i, b) lives at a + r_l * (i + n * b). With this
/// layout the left unfolding ((r_l n) x r_r) and the right unfolding
/// (r_l x (n r_r)) are both plain column-major views of the same buffer.
///
/// Dense tensors (to_dense / from_dense) use the same convention: the first
/// mode index runs fastest.
namespace ttasgfem::tt {

class Core {
public:
    Core() = default;
    Core(Index left_rank, Index mode_size, Index right_rank);

    [[nodiscard]] Index left_rank() const { return rl_; }
    [[nodiscard]] Index mode_size() const { return n_; }
    [[nodiscard]] Index right_rank() const { return rr_; }
    [[nodiscard]] Index size() const { return rl_ * n_ * rr_; }

    double& operator()(Index a, Index i, Index b) { return data_[a + rl_ * (i + n_ * b)]; }
    double operator()(Index a, Index i, Index b) const { return data_[a + rl_ * (i + n_ * b)]; }

    Eigen::Map<Matrix> left_unfolding() { return {data_.data(), rl_ * n_, rr_}; }
    [[nodiscard]] Eigen::Map<const Matrix> left_unfolding() const { return {data_.data(), rl_ * n_, rr_}; }
    Eigen::Map<Matrix> right_unfolding() { return {data_.data(), rl_, n_ * rr_}; }
    [[nodiscard]] Eigen::Map<const Matrix> right_unfolding() const { return {data_.data(), rl_, n_ * rr_}; }

    /// Slice at mode index i as an r_l x r_r matrix.
    [[nodiscard]] Matrix slice(Index i) const;
    void set_slice(Index i, const Matrix& m);

    std::vector<double>& data() { return data_; }
    [[nodiscard]] const std::vector<double>& data() const { return data_; }

    static Core from_left_unfolding(const Matrix& m, Index left_rank, Index mode_size);
    static Core from_right_unfolding(const Matrix& m, Index mode_size, Index right_rank);

private:
    Index rl_ = 0;
    Index n_ = 0;
    Index rr_ = 0;
    std::vector<double> data_;
};

class TTTensor {
public:
    TTTensor() = default;
    /// Validates that adjacent ranks match and boundary ranks are one.
    explicit TTTensor(std::vector<Core> cores);

    static TTTensor zeros(std::span<const Index> dims, std::span<const Index> ranks);
    static TTTensor random(std::span<const Index> dims, std::span<const Index> ranks,
                           std::mt19937_64& rng);
    static TTTensor rank_one(const std::vector<Vector>& factors);
    /// TT-SVD of a dense tensor (first index fastest).
    static TTTensor from_dense(const Vector& values, std::span<const Index> dims,
                               double rel_tol = 0.0, Index max_rank = 0);

    [[nodiscard]] std::size_t order() const { return cores_.size(); }
    [[nodiscard]] std::vector<Index> dims() const;
    /// (1, r_1, ..., r_{d-1}, 1)
    [[nodiscard]] std::vector<Index> ranks() const;
    [[nodiscard]] Index max_rank() const;
    [[nodiscard]] Index full_size() const;

    [[nodiscard]] const Core& core(std::size_t k) const { return cores_.at(k); }
    Core& core(std::size_t k) { return cores_.at(k); }
    [[nodiscard]] const std::vector<Core>& cores() const { return cores_; }
    std::vector<Core>& cores() { return cores_; }

    [[nodiscard]] double eval(std::span<const Index> idx) const;
    [[nodiscard]] Vector to_dense() const;

private:
    std::vector<Core> cores_;
};

// ---------------------------------------------------------------------------
// Arithmetic
// ---------------------------------------------------------------------------

TTTensor add(const TTTensor& x, const TTTensor& y);
TTTensor scale(const TTTensor& x, double alpha);
/// x - y
TTTensor subtract(const TTTensor& x, const TTTensor& y);
double dot(const TTTensor& x, const TTTensor& y);
/// Frobenius norm, computed through a right-orthogonalisation sweep. Agrees
/// with sqrt(dot(x, x)) but keeps full relative accuracy for differences of
/// nearly equal tensors.
double norm(const TTTensor& x);

/// Cores 1..d-1 right-orthonormal; core 0 carries the norm.
TTTensor right_orthogonalize(const TTTensor& x);
/// Cores 0..d-2 left-orthonormal; the last core carries the norm.
TTTensor left_orthogonalize(const TTTensor& x);

/// HSVD rounding: right-orthogonalise, then a left-to-right sweep of
/// truncated SVDs with per-unfolding threshold rel_tol ||x|| / sqrt(d-1).
/// max_rank = 0 means no cap.
TTTensor round(const TTTensor& x, double rel_tol, Index max_rank = 0);

/// Multiplies slice i of core k by weights[k][i]. Empty weight vectors pass
/// the dimension through unchanged.
TTTensor mask_hadamard(const TTTensor& x, const std::vector<std::vector<double>>& weights);

/// Interface dimension of the TT manifold; the leading core contributes
/// q_0 r_1.
std::int64_t tt_dofs(const TTTensor& x);
std::int64_t tt_dofs(std::span<const Index> dims, std::span<const Index> ranks);

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

/// Operator core of shape (s_l, rows, cols, s_r). Either dense, with entry
/// (a, i, j, b) at a + s_l * (i + rows * (j + cols * b)), or a bank of
/// sparse rows x cols matrices indexed by a + s_l * b.
class OpCore {
public:
    OpCore() = default;
    OpCore(Index left_rank, Index rows, Index cols, Index right_rank);
    /// Sparse bank, bank[a + s_l * b].
    OpCore(Index left_rank, Index right_rank, std::vector<SparseMatrix> bank);

    [[nodiscard]] Index left_rank() const { return sl_; }
    [[nodiscard]] Index rows() const { return rows_; }
    [[nodiscard]] Index cols() const { return cols_; }
    [[nodiscard]] Index right_rank() const { return sr_; }
    [[nodiscard]] bool is_sparse() const { return sparse_; }

    double& operator()(Index a, Index i, Index j, Index b);
    [[nodiscard]] double operator()(Index a, Index i, Index j, Index b) const;

    [[nodiscard]] Matrix block(Index a, Index b) const;
    [[nodiscard]] const SparseMatrix& sparse_block(Index a, Index b) const;
    [[nodiscard]] const std::vector<SparseMatrix>& bank() const { return bank_; }

    /// y = block(a,b) * x for a column block x (cols x k).
    [[nodiscard]] Matrix apply_block(Index a, Index b, const Eigen::Ref<const Matrix>& x) const;

private:
    Index sl_ = 0;
    Index rows_ = 0;
    Index cols_ = 0;
    Index sr_ = 0;
    bool sparse_ = false;
    std::vector<double> data_;
    std::vector<SparseMatrix> bank_;
};

class TTOperator {
public:
    TTOperator() = default;
    explicit TTOperator(std::vector<OpCore> cores);

    static TTOperator identity(std::span<const Index> dims);
    static TTOperator rank_one(const std::vector<Matrix>& factors);

    [[nodiscard]] std::size_t order() const { return cores_.size(); }
    [[nodiscard]] std::vector<Index> row_dims() const;
    [[nodiscard]] std::vector<Index> col_dims() const;
    [[nodiscard]] std::vector<Index> ranks() const;
    [[nodiscard]] const OpCore& core(std::size_t k) const { return cores_.at(k); }
    OpCore& core(std::size_t k) { return cores_.at(k); }
    [[nodiscard]] const std::vector<OpCore>& cores() const { return cores_; }

    /// Dense matrix, row/column multi-indices with the first mode fastest.
    [[nodiscard]] Matrix to_dense() const;

private:
    std::vector<OpCore> cores_;
};

/// Core-wise contraction; result ranks are s_k * r_k with the operator rank
/// index running fastest.
TTTensor mpo_apply(const TTOperator& op, const TTTensor& x);

/// N^2 s_1 - s_1^2 + sum_{l=1}^{L-1} (s_l q_l^2 s_{l+1} - s_{l+1}^2) + s_L q_L^2,
/// with N the leading row dimension.
std::int64_t op_dofs(const TTOperator& op);
std::int64_t op_dofs(std::span<const Index> dims, std::span<const Index> ranks);

// ---------------------------------------------------------------------------
// Serialization: shape header followed by row-major core data.
// ---------------------------------------------------------------------------

std::string to_json(const TTTensor& x);
TTTensor tensor_from_json(const std::string& text);
void write_binary(std::ostream& out, const TTTensor& x);
TTTensor read_binary(std::istream& in);

} // namespace ttasgfem::tt
