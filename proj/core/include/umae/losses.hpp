#pragma once

#include <Eigen/Dense>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "umae/dataset.hpp"
#include "umae/graph.hpp"
#include "umae/masking.hpp"
#include "umae/model.hpp"

namespace umae {

enum class LossForm { Empirical, Exact };

struct LossReport {
  std::string name;
  double value = 0.0;
  LossForm form = LossForm::Exact;
  std::vector<std::pair<std::string, double>> components;

  double component(const std::string& key) const;
};

nlohmann::json to_json(const LossReport& r);

/// Distribution over X1 nodes used for independent (negative) draws.
enum class Marginal { Degree, Uniform };

Eigen::VectorXd node_marginal(const Eigen::VectorXd& degrees, Marginal kind);

/// f on every X1 node, one row per node.
Eigen::MatrixXd encoder_features(const EncoderDecoder& m, const MaskGraph& g);
/// h on every X1 node (normalized reconstruction of its complement).
Eigen::MatrixXd reconstructions(const EncoderDecoder& m, const MaskGraph& g);
/// h_g on every X2 node.
Eigen::MatrixXd pseudo_outputs(const PseudoEncoder& hg, const MaskGraph& g);

/// sum_{edges} w ||h(x1) - normalize(x2)||^2.
LossReport mae_loss(const EncoderDecoder& m, const MaskGraph& g);

/// -E h(x1).h_g(x2), evaluated both as an edge expectation and as
/// -tr(H_g^T Abar_M H); throws NumericalError if they differ by > 1e-10.
LossReport asym_align_loss(const EncoderDecoder& m, const PseudoEncoder& hg, const MaskGraph& g);

/// -sum A(i,i') feat_i.feat_i' / sum A over the augmentation graph.
LossReport align_loss(const Eigen::MatrixXd& features, const AugGraph& aug);

/// sum_{i,i'} p_i p_i' (feat_i.feat_i')^2, coincident draws included.
LossReport unif_loss(const Eigen::MatrixXd& features, const Eigen::VectorXd& marginal);

/// mae_loss + lambda * unif_loss(f).
LossReport umae_loss(const EncoderDecoder& m, const MaskGraph& g, double lambda,
                     Marginal marginal = Marginal::Degree);

/// 2 * align + unif on the given features.
LossReport scl_loss(const Eigen::MatrixXd& features, const AugGraph& aug,
                    const Eigen::VectorXd& marginal);

using FeatureFn = std::function<Eigen::VectorXd(const View&)>;

/// Draws from the data and mask distribution: (x1, x2) pairs, positive pairs
/// (x1, x1+) sharing a target, and independent unmasked views.
class ViewSampler {
 public:
  ViewSampler(const Dataset& ds, const MaskFamily& family, std::uint64_t seed);

  ViewPair draw_pair();
  /// x1 and x1+ drawn with probability A(x1, x1+).
  PairSample draw_positive();
  /// Positive partner for a given image and mask: x1+ is the kept view of an
  /// image drawn uniformly among those whose dropped content matches.
  PairSample positive_for(std::size_t image, const Mask& mask);
  View draw_unmasked();

  Rng& rng() { return rng_; }

 private:
  const Dataset* ds_;
  MaskFamily family_;
  Rng rng_;
};

LossReport mae_loss_empirical(const EncoderDecoder& m, ViewSampler& sampler, long samples);
LossReport align_loss_empirical(const FeatureFn& feat, ViewSampler& sampler, long samples);
LossReport unif_loss_empirical(const FeatureFn& feat, ViewSampler& sampler, long samples);
LossReport scl_loss_empirical(const FeatureFn& feat, ViewSampler& sampler, long samples);
LossReport umae_loss_empirical(const EncoderDecoder& m, ViewSampler& sampler, double lambda, long samples);

}  // namespace umae
