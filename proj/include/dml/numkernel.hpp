#pragma once

#include <span>
#include <utility>
#include <vector>

namespace dml {

/// Norms below this floor are treated as degenerate.
inline constexpr double kNormFloor = 1e-12;
/// Rounding tolerance allowed on |cosine similarity| before clamping.
inline constexpr double kSimilarityTolerance = 1e-9;

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

/// Returns a / ||a||. Throws ZeroNormError below kNormFloor.
std::vector<double> l2_normalize(std::span<const double> a);

/// a.b / (||a|| ||b||), clamped to [-1, 1]. Symmetric bit-for-bit.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Partial derivatives of cosine_similarity with respect to each argument:
///   ds/da = b / (|a||b|) - s a / |a|^2
///   ds/db = a / (|a||b|) - s b / |b|^2
std::pair<std::vector<double>, std::vector<double>> cosine_similarity_grad(
    std::span<const double> a, std::span<const double> b);

/// Accumulating form of cosine_similarity_grad: adds scale * ds/da into
/// `grad_a` and scale * ds/db into `grad_b`. Used by every loss backward.
void accumulate_cosine_grad(std::span<const double> a,
                            std::span<const double> b, double scale,
                            std::span<double> grad_a, std::span<double> grad_b);

/// log(sum(exp(v))) with the max-shift trick. Throws EmptyInputError.
double log_sum_exp(std::span<const double> values);

/// log(1 + sum(exp(v))), i.e. LSE over v with an implicit extra 0 term.
/// Returns 0 for an empty sequence.
double log1p_sum_exp(std::span<const double> values);

/// log(1 + e^z), overflow safe.
double softplus(double z);

/// d softplus / dz = logistic(z).
double sigmoid(double z);

}  // namespace dml
