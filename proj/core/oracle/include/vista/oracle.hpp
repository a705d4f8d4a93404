#pragma once

// Scalar-loop reference implementations. Each function transcribes its
// summation directly with nested loops and shares no arithmetic with the
// production modules; production types are used only as data carriers.

#include <cstddef>
#include <span>
#include <vector>

#include "vista/attention.hpp"
#include "vista/inference.hpp"
#include "vista/tensor.hpp"

namespace vista::oracle {

struct OracleBudget {
  std::size_t max_elements = 65536;
};

Tensor naive_conv2d(const Tensor& input, const Tensor& kernels, int stride,
                    int pad, OracleBudget budget = {});

Tensor naive_resize_bilinear(const Tensor& input, std::size_t out_h,
                             std::size_t out_w, OracleBudget budget = {});

Tensor naive_z_step(const Tensor& f_r, std::span<const Tensor> messages,
                    std::span<const StructuredAttention> atts,
                    const Tensor& precision, OracleBudget budget = {});

Tensor naive_m_step(const Tensor& z_r, const Tensor& message, const Tensor& v_bar,
                    double bias = 0.0, OracleBudget budget = {});

Tensor naive_v_step(const Tensor& z_r, const Tensor& message, const Tensor& m_bar,
                    const Tensor& bias, OracleBudget budget = {});

Tensor naive_k_step(const Tensor& f_r, const Tensor& f_e, const Tensor& z_r,
                    const Tensor& z_e, const StructuredAttention& att,
                    OracleBudget budget = {});

/// -E with quadratic unaries and bilinear pairwise terms, one loop per sum.
double naive_energy(const Tensor& f_r, std::span<const Tensor> f_e,
                    const Tensor& z_r, std::span<const Tensor> z_e,
                    std::span<const StructuredAttention> atts,
                    std::span<const Tensor> kernels, const Tensor& precision,
                    OracleBudget budget = {});

struct NaiveRefineResult {
  Tensor refined;
  Tensor hidden;
  std::vector<std::vector<Tensor>> maps;
  std::vector<std::vector<Tensor>> vectors;
};

/// Straight-line transcription of the receiving-scale refinement. The
/// random M guess is passed in explicitly (initial_maps[e][t]).
NaiveRefineResult naive_refine_scale(
    const MultiScaleFeatures& f, const KernelBank& bank,
    const AttentionParams& params, const InferenceConfig& cfg,
    const std::vector<std::vector<Tensor>>& initial_maps,
    OracleBudget budget = {});

/// Singular values (descending) of a rows x cols row-major matrix by
/// one-sided Jacobi rotations.
std::vector<double> singular_values(std::vector<double> matrix, std::size_t rows,
                                    std::size_t cols);

/// Numerical rank of the P x C matricization of a [C,H,W] tensor: number of
/// singular values above tol * largest.
std::size_t matricization_rank(const Tensor& a, double tol,
                               OracleBudget budget = {});

}  // namespace vista::oracle
