#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "umae/graph.hpp"
#include "umae/view.hpp"

namespace umae {

enum class Arch { Linear, Mlp };

std::string to_string(Arch arch);
Arch arch_from_string(const std::string& name);

struct ModelConfig {
  int n = 2;
  int s = 1;
  int k = 2;
  Arch arch = Arch::Linear;
  int hidden = 16;  // mlp only
  bool normalize_encoder = true;
  std::uint64_t seed = 0;

  /// Per position: s content values (zero when hidden) and one visibility bit.
  int input_dim() const { return n * (s + 1); }
  int output_dim() const { return n * s; }
};

struct Affine {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

/// Every trainable parameter; also used as the gradient container.
struct ParamSet {
  std::vector<Affine> encoder;  // one layer (linear) or two with tanh between (mlp)
  Affine decoder;

  ParamSet zeros_like() const;
  Eigen::Index size() const;
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);
  /// this += alpha * other
  void axpy(double alpha, const ParamSet& other);
  void scale(double alpha);
  bool all_finite() const;
};

/// Encoder f: view -> R^k and decoder g: R^k -> R^{n s}. Reconstructions are
/// the decoder output restricted to the target positions and l2-normalized.
class EncoderDecoder {
 public:
  EncoderDecoder() = default;
  EncoderDecoder(ModelConfig config, ParamSet params);

  const ModelConfig& config() const { return config_; }
  const ParamSet& params() const { return params_; }
  ParamSet& params() { return params_; }

  Eigen::VectorXd embed(const View& v) const;
  Eigen::VectorXd encode(const View& v) const;
  Eigen::VectorXd decode(const Eigen::VectorXd& z) const;
  /// Normalized decoder output of f(input) at the target positions.
  Eigen::VectorXd reconstruct(const View& input, const std::vector<int>& target_positions) const;
  /// Normalized reconstruction of the dropped positions of `mask` from its kept view.
  Eigen::VectorXd reconstruct(const View& kept, const Mask& mask) const;

 private:
  ModelConfig config_;
  ParamSet params_;
};

/// Glorot-uniform initialization, a = sqrt(6 / (fan_in + fan_out)) for both
/// weights and biases of each layer; deterministic in config.seed.
EncoderDecoder init_model(const ModelConfig& config);

/// True when k exceeds the data dimension n*s (allowed, but worth a warning).
bool embedding_wider_than_data(const ModelConfig& config);

enum class LossKind { Mae, UMae, Scl };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

struct LossSpec {
  LossKind kind = LossKind::Mae;
  double lambda = 0.01;  // uniformity weight for U-MAE
};

/// Reconstruct `target` from `input`; weight scales the sample in the mean.
struct ReconSample {
  View input;
  View target;
  double weight = 1.0;
};

/// Two views that form a positive pair in the augmentation graph.
struct PairSample {
  View a;
  View b;
};

struct Batch {
  std::vector<ReconSample> recon;
  std::vector<PairSample> pairs;
};

struct LossResult {
  double loss = 0.0;
  double recon_part = 0.0;  // weighted mean squared reconstruction error
  double align_part = 0.0;  // -mean f(a).f(b) over positive pairs
  double unif_part = 0.0;   // mean squared feature similarity, self pairs included
  ParamSet gradients;
};

/// Batch loss and its exact gradient.
///   Mae:  mean_b w_b ||h(input_b) - t_b||^2 / sum w
///   UMae: Mae + lambda * (1/B^2) sum_{a,b} (f_a . f_b)^2 over the recon inputs
///   Scl:  2 * align + unif, unif over all 2P pair features
LossResult loss_and_gradients(const EncoderDecoder& m, const Batch& batch, const LossSpec& spec);

/// Largest |analytic - numeric| / (1e-8 + |numeric|) over all parameters,
/// numeric by central differences with step 1e-5 * (1 + |theta|).
double check_gradients(const EncoderDecoder& m, const Batch& batch, const LossSpec& spec);

nlohmann::json model_to_json(const EncoderDecoder& m);
EncoderDecoder model_from_json(const nlohmann::json& j);

enum class PseudoMode { Identity, Trained };

struct PseudoTrainOptions {
  int k = 4;
  Arch arch = Arch::Linear;
  int hidden = 16;
  int epochs = 3000;
  double learning_rate = 0.1;
  double momentum = 0.9;
  std::uint64_t seed = 7;
};

/// Stand-in for the pseudo-inverse autoencoder h_g. Identity mode returns the
/// normalized view (epsilon = 0); trained mode fits a small autoencoder to the
/// masked views of a graph and records its measured error.
class PseudoEncoder {
 public:
  static PseudoEncoder identity();

  PseudoMode mode() const { return mode_; }
  /// Measured E ||h_g(x2) - x2||^2 under the d2 weights (0 in identity mode).
  double epsilon() const { return epsilon_; }
  Eigen::VectorXd apply(const View& x) const;

 private:
  friend PseudoEncoder make_pseudo_encoder(const MaskGraph&, PseudoMode, const PseudoTrainOptions&);
  PseudoMode mode_ = PseudoMode::Identity;
  std::optional<EncoderDecoder> model_;
  double epsilon_ = 0.0;
};

PseudoEncoder make_pseudo_encoder(const MaskGraph& g, PseudoMode mode,
                                  const PseudoTrainOptions& options = {});

}  // namespace umae
