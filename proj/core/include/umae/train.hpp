#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "umae/dataset.hpp"
#include "umae/graph.hpp"
#include "umae/masking.hpp"
#include "umae/model.hpp"

namespace umae {

struct TrainConfig {
  LossSpec loss;
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  int snapshot_every = 10;
  /// Mask draws for the diagnostic graph when the exhaustive one would be too large.
  long probe_draws = 4096;

  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct Snapshot {
  int epoch = 0;
  double loss = 0.0;
  double recon_part = 0.0;
  double align_part = 0.0;
  double unif_part = 0.0;
  double erank = 0.0;
  Eigen::VectorXd singular_values;
  double probe_acc = 0.0;
};

struct TrainTrace {
  std::vector<Snapshot> records;

  /// Header "epoch,loss,align_part,unif_part,erank,probe_acc".
  std::string to_csv() const;
};

struct TrainResult {
  EncoderDecoder model;
  TrainTrace trace;
};

/// Graph used for training diagnostics: exhaustive when small enough, else a
/// seeded sample of `probe_draws` (image, mask) draws.
MaskGraph diagnostic_graph(const Dataset& ds, const MaskFamily& family, long probe_draws, std::uint64_t seed);

/// Diagnostics of a frozen model: exact losses on the graph, effective rank
/// and singular values of the full-image features, mean-classifier accuracy.
Snapshot snapshot(const EncoderDecoder& m, const Dataset& ds, const MaskGraph& g, const LossSpec& loss, int epoch);

/// Minibatch SGD with momentum and decoupled weight decay. Each epoch visits
/// the images in a seeded permutation and draws a fresh mask per example.
/// Snapshots are taken every snapshot_every epochs and after the last one.
TrainResult train(const EncoderDecoder& m, const Dataset& ds, const MaskFamily& family, const TrainConfig& cfg);

/// Minimizer of the spectral contrastive loss over k-dimensional features on
/// the X1 nodes: row i is U[i] / sqrt(d1[i]) for the rank-k spectral embedding U.
Eigen::MatrixXd spectral_solve(const AugGraph& g, int k);

}  // namespace umae
