#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "umae/dataset.hpp"
#include "umae/graph.hpp"
#include "umae/model.hpp"

namespace umae {

/// Singular values of a feature matrix, descending.
Eigen::VectorXd singular_values(const Eigen::MatrixXd& features);

/// exp(-sum p_i log p_i) with p = sigma / ||sigma||_1. Singular values below
/// eps * max(rows, cols) * sigma_max count as zero.
double effective_rank(const Eigen::MatrixXd& features);

/// Encoder features of every image in the dataset, each fed as an all-visible view.
Eigen::MatrixXd image_features(const EncoderDecoder& m, const Dataset& ds);

/// sum_j d2[j] ||t_j - tbar||^2 over the normalized targets, one pooled mean.
double target_variance(const MaskGraph& g);

/// Same, but each target is centered on the mean of targets under its own
/// mask. This is the floor a constant encoder cannot go below.
double conditional_target_variance(const MaskGraph& g);

/// Incidence mass of (image, x1 view) draws whose view label differs from the image label.
double label_error(const MaskGraph& g, const Dataset& ds);

struct ProbeResult {
  double accuracy = 0.0;
  Eigen::MatrixXd W;  // c x k, row y = mean feature of views labeled y
};

/// Mean classifier built from the encoder on the graph's X1 views (weights
/// d1), evaluated on every full image of the dataset.
ProbeResult mean_classifier_probe(const EncoderDecoder& m, const MaskGraph& g, const Dataset& ds);

/// Mean classifier on given per-node features; accuracy is the incidence
/// mass of views whose prediction matches the image label.
ProbeResult view_probe(const Eigen::MatrixXd& features, const MaskGraph& g);

struct LipschitzOptions {
  long samples = 2000;
  std::uint64_t seed = 0;
};

/// Empirical bi-Lipschitz constant of f -> h: the largest ratio
/// ||h - h'||^2 / ||f - f'||^2 or its inverse, over positive pairs of the
/// augmentation graph, sampled node pairs and sampled latent pairs. Pairs
/// with ||f - f'|| <= 1e-6 are skipped; 1 when nothing qualifies.
double estimate_lipschitz(const EncoderDecoder& m, const MaskGraph& g, const AugGraph& aug,
                          const LipschitzOptions& options = {});

struct BoundEntry {
  std::string id;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool asserted = true;            // false for entries that are only reported
  bool empirical_constant = false;  // the right side uses the estimated Lipschitz constant
  bool pass = true;
};

struct BoundContext {
  double epsilon = 0.0;
  double lambda = 0.0;    // as supplied
  double lambda_t = 0.0;  // 1 / (4 L) used by the U-MAE bounds
  double lipschitz = 1.0;
  double alpha = 0.0;
  int k = 0;
  double residual = 0.0;
  double abar_norm2 = 0.0;
  double feature_mass = 0.0;  // sum_i d1[i] ||f_i||^2
  double downstream_error = 0.0;  // 1 - mean-classifier accuracy
  double c4 = 0.0;                // calibrated gap of the downstream bound
};

struct BoundReport {
  std::vector<BoundEntry> entries;
  BoundContext context;

  bool all_pass() const;
  const BoundEntry& entry(const std::string& id) const;
};

nlohmann::json to_json(const BoundReport& r);

struct BoundOptions {
  PseudoEncoder hg = PseudoEncoder::identity();
  /// T4 is added automatically for constant encoders; requiring it on any
  /// other encoder is an error.
  bool require_t4 = false;
  LipschitzOptions lipschitz;
};

/// Evaluates both sides of every bound in the chain on one instance.
/// Asserted entries pass when slack >= -1e-9.
BoundReport verify_bounds(const EncoderDecoder& m, const MaskGraph& g, const AugGraph& aug,
                          const Dataset& ds, int k, double lambda, const BoundOptions& options = {});

inline constexpr double kBoundTolerance = 1e-9;

/// True when f is the same vector (within 1e-12) on every X1 node.
bool encoder_is_constant(const EncoderDecoder& m, const MaskGraph& g);

/// A model whose encoder ignores its input: encoder weights are zeroed after
/// the usual initialization.
EncoderDecoder constant_encoder_model(const ModelConfig& config);

enum class DistanceMetric { Average, Max };

std::string to_string(DistanceMetric metric);
DistanceMetric metric_from_string(const std::string& name);

struct SweepOptions {
  std::vector<double> rho_grid;
  DistanceMetric metric = DistanceMetric::Average;
  long pairs_budget = 0;  // per pair type; 0 or >= available means every pair
  std::uint64_t seed = 0;
  int threads = 1;
  std::uint64_t mask_cap = 4096;  // enumerate masks when C(n, n1) is at most this
};

struct SweepRecord {
  double rho = 0.0;
  double intra = 0.0;
  double inter = 0.0;
  double relative = 0.0;  // NaN when inter == 0
  long samples = 0;
};

struct SweepResult {
  DistanceMetric metric = DistanceMetric::Average;
  std::vector<SweepRecord> records;
  double sweet_spot = 0.0;  // grid point minimizing relative, ties to the smallest rho
};

/// Intra- and inter-class distances between the surviving views of image
/// pairs. Both images of a pair share one mask and are compared at
/// corresponding kept positions: the mean (Average) or max (Max) of the
/// per-position patch distances.
SweepResult distance_sweep(const Dataset& ds, const SweepOptions& options);

/// CSV with header "rho,intra,inter,relative".
std::string sweep_csv(const SweepResult& r);

}  // namespace umae
