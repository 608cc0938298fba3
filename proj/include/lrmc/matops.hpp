#pragma once

#include <cstdint>
#include <utility>

#include "lrmc/types.hpp"

namespace lrmc {

/// (A B^T)_(i,j) = sum_k A(i,k) * B(j,k), accumulated in ascending k.
///
/// This is the one dot-product kernel shared by data generation, the masked
/// product kernels, and the ground-truth metrics. Keeping a single
/// non-inlined code path makes the same (i, j) entry evaluate to the same
/// bits at every call site, which the exact support-inclusion guarantees
/// rely on.
double product_entry(const DenseMatrix& A, Index i, const DenseMatrix& B,
                     Index j);

/// out[e] = (L R^T) at support entry e, for every entry of `support`.
void product_on_support(const DenseMatrix& L, const DenseMatrix& R,
                        const IndexSet& support, Vector& out);

/// Entrywise sign(m) * max(0, |m| - zeta). An entry sitting exactly at the
/// kink (|m| = zeta) maps to 0.
DenseMatrix soft_threshold(const DenseMatrix& M, double zeta);
MaskedMatrix soft_threshold(const MaskedMatrix& M, double zeta);

/// In-place kernel over raw values (used by the solver's hot loop).
void soft_threshold_values(Vector& values, double zeta);

/// Keeps entry (i,j) iff its magnitude is >= the ceil(alpha_tilde * n2)-th
/// largest in row i AND >= the ceil(alpha_tilde * n1)-th largest in column
/// j; everything else becomes zero. A count of zero keeps nothing. Ties at
/// the cutoff are kept.
DenseMatrix sparsify_top_fraction(const DenseMatrix& M, double alpha_tilde);
MaskedMatrix sparsify_top_fraction(const MaskedMatrix& M, double alpha_tilde);

/// Top-r singular triple. Exact dense decomposition when min(n1, n2) <=
/// 400; otherwise seeded randomized subspace iteration (oversampling 8,
/// 8 power iterations, then refined until the spectrum stabilizes).
SVDTriple truncated_svd(const DenseMatrix& M, int rank,
                        std::uint64_t seed = 0x5eedu);
SVDTriple truncated_svd(const MaskedMatrix& M, int rank,
                        std::uint64_t seed = 0x5eedu);

/// Pi_Omega(L R^T + S - Y), computed entrywise over Y's support only; the
/// dense product is never materialized. support(S) must be contained in
/// support(Y).
MaskedMatrix masked_residual(const DenseMatrix& L, const DenseMatrix& R,
                             const SparseEstimate& S, const MaskedMatrix& Y);

/// One preconditioned gradient step on both factors:
///   L' = L - (eta/p) * W R (R^T R)^-1,
///   R' = R - (eta/p) * W^T L (L^T L)^-1,
/// with both gram matrices taken from the pre-update factors. Gram systems
/// are solved by Cholesky after a condition estimate; an estimate above
/// 1e12 raises SingularFactorError naming the offending side.
std::pair<DenseMatrix, DenseMatrix> scaled_grad_step(const DenseMatrix& L,
                                                     const DenseMatrix& R,
                                                     const MaskedMatrix& W,
                                                     double eta, double p);

/// Power-iteration estimate of the spectral norm (relative tolerance 1e-6,
/// iteration cap 1000; the current estimate is returned if the cap hits).
double spectral_norm_est(const DenseMatrix& M, double rel_tol = 1e-6,
                         int max_iters = 1000,
                         std::uint64_t seed = 0x5eedu);
double spectral_norm_est(const MaskedMatrix& M, double rel_tol = 1e-6,
                         int max_iters = 1000,
                         std::uint64_t seed = 0x5eedu);

double fro_norm(const DenseMatrix& M);
double fro_norm(const MaskedMatrix& M);
double inf_norm(const DenseMatrix& M);
double inf_norm(const MaskedMatrix& M);

/// ||L R^T||_F via r x r gram products; O(n r^2), no cancellation.
double fro_norm_product(const DenseMatrix& L, const DenseMatrix& R);

/// ||L1 R1^T - L2 R2^T||_F via gram products. Fast but loses accuracy once
/// the true difference drops below ~1e-8 of the operand scale.
double fro_diff_product_gram(const DenseMatrix& L1, const DenseMatrix& R1,
                             const DenseMatrix& L2, const DenseMatrix& R2);

/// ||L1 R1^T - L2 R2^T||_F, streamed entrywise through product_entry.
double fro_diff_product_exact(const DenseMatrix& L1, const DenseMatrix& R1,
                              const DenseMatrix& L2, const DenseMatrix& R2);

/// ||L1 R1^T - L2 R2^T||_inf, streamed entrywise through product_entry.
double inf_diff_product_exact(const DenseMatrix& L1, const DenseMatrix& R1,
                              const DenseMatrix& L2, const DenseMatrix& R2);

/// ceil(fraction * n) as an integer count, snapping away float fuzz so that
/// e.g. fraction = 0.1, n = 30 yields 3 and not 4.
Index ceil_count(double fraction, Index n);

}  // namespace lrmc
