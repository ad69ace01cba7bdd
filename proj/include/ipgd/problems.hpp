#pragma once

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>
#include <utility>
#include <vector>

#include "ipgd/measurement.hpp"
#include "ipgd/problem.hpp"
#include "ipgd/rng.hpp"

namespace ipgd {

// ---------------------------------------------------------------------------
// Family payloads. Generators fill these; tests may also construct them
// directly for hand-checkable instances.
// ---------------------------------------------------------------------------

struct MatrixSensingData {
  MeasurementStack stack;      // N matrices, n x n
  Eigen::MatrixXd m_star;      // n x n, symmetric PSD, rank r
  Eigen::MatrixXd u_star;      // n x r, orthonormal columns
  Eigen::VectorXd sigma_star;  // r positive, descending
  Eigen::VectorXd y;           // exact <A_i, M*>
  int r = 1;
  int r_prime = 1;
};

struct AsymSensingData {
  MeasurementStack stack;  // N matrices, n1 x n2
  Eigen::MatrixXd m_star;  // n1 x n2, rank r
  Eigen::MatrixXd u_star;  // n1 x r
  Eigen::MatrixXd v_star;  // n2 x r
  Eigen::VectorXd sigma_star;
  Eigen::VectorXd y;
  double lambda_balance = 0.25;
  int r = 1;
  int r_prime = 1;
};

struct CompletionData {
  Eigen::MatrixXd m_star;
  Eigen::MatrixXd u_star;
  Eigen::MatrixXd v_star;  // equals u_star when symmetric
  Eigen::VectorXd sigma_star;
  Eigen::MatrixXd mask;                        // 0/1, same shape as m_star
  std::vector<std::pair<int, int>> mask_idx;   // observed (i, j) pairs
  bool symmetric = true;
  double p = 0.8;
  double lambda_balance = 0.25;  // asymmetric only
  int r = 1;
  int r_prime = 1;
};

struct OneBitData {
  Eigen::MatrixXd m_star;
  Eigen::MatrixXd alpha;  // sigmoid(m_star), entries in (0,1)
  Eigen::MatrixXd u_star;
  Eigen::MatrixXd v_star;
  Eigen::VectorXd sigma_star;
  bool symmetric = true;
  double lambda_balance = 0.25;
  int r = 1;
  int r_prime = 1;
};

struct SparseData {
  Eigen::MatrixXd design;      // N x d, rows are sample vectors x_i
  Eigen::VectorXd y;           // exact <theta*, x_i>
  Eigen::VectorXd theta_star;  // d
  std::vector<int> s_plus;     // indices with theta* > 0
  std::vector<int> s_minus;    // indices with theta* < 0
};

// ---------------------------------------------------------------------------
// Generators. All randomness comes from the seed; the draw order is fixed so
// instances replay exactly.
// ---------------------------------------------------------------------------

// f(X) = (1/4N) sum_i (<A_i, X X^T> - y_i)^2, A_i iid standard Gaussian,
// M* = U* diag(sigma) U*^T. n_measurements <= 0 selects the default 10*n*r.
ProblemPtr gen_matrix_sensing(int n, int r, int r_prime, int n_measurements,
                              const Eigen::VectorXd& sigma_star, std::uint64_t seed);

// Asymmetric variant on factors (X, Y) with the balance penalty
// lambda * ||X^T X - Y^T Y||_F^2 added to the measurement loss
// (1/4N) sum_i (<A_i, X Y^T> - y_i)^2.
ProblemPtr gen_matrix_sensing_asym(int n1, int n2, int r, int r_prime,
                                   int n_measurements, double lambda_balance,
                                   const Eigen::VectorXd& sigma_star, std::uint64_t seed);

// f = sum_{(i,j) observed} ((X X^T)_ij - M*_ij)^2 (symmetric), or the X Y^T
// version plus the balance penalty (asymmetric). Mask entries are iid
// Bernoulli(p).
ProblemPtr gen_matrix_completion(int n1, int n2, int r, int r_prime, double p,
                                 bool symmetric, double lambda_balance,
                                 const Eigen::VectorXd& sigma_star, std::uint64_t seed);

// Logistic observation model summed over all entries, shifted so the loss is
// 0 at the planted signal; alpha = sigmoid(M*).
ProblemPtr gen_one_bit(int n1, int n2, int r, int r_prime, bool symmetric,
                       double lambda_balance, const Eigen::VectorXd& sigma_star,
                       std::uint64_t seed);

// f(u, v) = sum_i (y_i - <u o u - v o v, x_i>)^2 with fixed sign-split
// supports taken from theta_star. Empty theta_star selects the default
// (10, -5, 3, -2, 1, 0, ..., 0).
ProblemPtr gen_sparse(int d, int n_samples, const Eigen::VectorXd& theta_star,
                      std::uint64_t seed);

// Direct constructors for hand-built payloads (tests, replay).
ProblemPtr make_matrix_sensing(MatrixSensingData data);
ProblemPtr make_matrix_sensing_asym(AsymSensingData data);
ProblemPtr make_matrix_completion(CompletionData data);
ProblemPtr make_one_bit(OneBitData data);
ProblemPtr make_sparse(SparseData data);

// Read-only payload access (throws std::invalid_argument on kind mismatch).
const MatrixSensingData& sensing_data(const Problem& p);
const AsymSensingData& sensing_asym_data(const Problem& p);
const CompletionData& completion_data(const Problem& p);
const OneBitData& one_bit_data(const Problem& p);
const SparseData& sparse_data(const Problem& p);

// Ground-truth factor point (a global minimizer laid out like the problem's
// parameter space; balanced factors for the asymmetric families).
ParamPoint ground_truth_point(const Problem& p);

// Single-document JSON snapshot of a problem instance, format
// "ipgd-problem/1"; matrices as nested row-major arrays, masks as index
// pairs. problem_from_json reconstructs an identical instance.
nlohmann::json problem_to_json(const Problem& p);
ProblemPtr problem_from_json(const nlohmann::json& j);

// Orthonormal columns via QR of an iid Gaussian matrix.
Eigen::MatrixXd random_orthonormal(Eigen::Index n, Eigen::Index r, Rng& rng);

// Numerically stable log(1 + exp(x)) and logistic function.
double softplus(double x);
double sigmoid(double x);

}  // namespace ipgd
