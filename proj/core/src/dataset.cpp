#include "umae/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include "umae/error.hpp"
#include "umae/random.hpp"

namespace umae {
namespace {

constexpr const char* kModule = "dataset";

bool same_bits(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

Eigen::VectorXd from_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Distinct small-integer patch vectors; positive entries keep every patch nonzero.
std::vector<Eigen::VectorXd> draw_vocabulary(int count, int s, Rng& rng) {
  const std::uint64_t span = static_cast<std::uint64_t>(std::max(9, 2 * count));
  std::vector<Eigen::VectorXd> out;
  std::set<std::vector<double>> seen;
  while (static_cast<int>(out.size()) < count) {
    Eigen::VectorXd v(s);
    for (int i = 0; i < s; ++i) v[i] = 1.0 + static_cast<double>(uniform_index(rng, span));
    if (seen.insert(to_vector(v)).second) out.push_back(std::move(v));
  }
  return out;
}

void check_spec(const SyntheticSpec& spec) {
  if (spec.classes < 1) throw ValidationError(kModule, "classes must be >= 1");
  if (spec.images_per_class < 1) throw ValidationError(kModule, "images_per_class must be >= 1");
  if (spec.classes * spec.images_per_class < 2)
    throw ValidationError(kModule, "a synthetic dataset needs at least 2 images");
  if (spec.n < 2) throw ValidationError(kModule, "n must be >= 2");
  if (spec.s < 1) throw ValidationError(kModule, "s must be >= 1");
  if (spec.class_signal_positions.empty())
    throw ValidationError(kModule, "class_signal_positions must be nonempty");
  std::vector<int> all = spec.class_signal_positions;
  all.insert(all.end(), spec.noise_positions.begin(), spec.noise_positions.end());
  std::sort(all.begin(), all.end());
  std::vector<int> expected(static_cast<std::size_t>(spec.n));
  std::iota(expected.begin(), expected.end(), 0);
  if (all != expected)
    throw ValidationError(kModule,
                          "signal and noise positions must partition {0..n-1} disjointly");
  if (!spec.vocab && spec.vocab_size < 2) throw ValidationError(kModule, "vocab_size must be >= 2");
}

void check_vocab(const SyntheticSpec& spec, const std::vector<PositionVocab>& vocab) {
  if (static_cast<int>(vocab.size()) != spec.n)
    throw ValidationError(kModule, "explicit vocabulary must have one entry per position");
  std::set<int> signal(spec.class_signal_positions.begin(), spec.class_signal_positions.end());
  for (int p = 0; p < spec.n; ++p) {
    const auto& pv = vocab[static_cast<std::size_t>(p)];
    if (pv.signal != static_cast<bool>(signal.count(p)))
      throw ValidationError(kModule, "vocabulary signal flag disagrees with the position sets");
    const std::size_t want = pv.signal ? static_cast<std::size_t>(spec.classes) : 1;
    if (pv.lists.size() != want)
      throw ValidationError(kModule, "vocabulary at position " + std::to_string(p) +
                                         " must hold " + std::to_string(want) + " list(s)");
    for (const auto& list : pv.lists) {
      if (list.empty()) throw ValidationError(kModule, "empty vocabulary list");
      for (const auto& v : list) {
        if (v.size() != spec.s) throw ValidationError(kModule, "vocabulary patch has wrong dimension");
        if (!v.allFinite()) throw ValidationError(kModule, "vocabulary patch is not finite");
      }
    }
  }
}

}  // namespace

GenerativeModel::GenerativeModel(std::vector<double> prior, std::vector<PositionVocab> vocab)
    : prior_(std::move(prior)), vocab_(std::move(vocab)) {}

double GenerativeModel::likelihood(int position, int cls, const Eigen::VectorXd& content) const {
  const auto& pv = vocab_.at(static_cast<std::size_t>(position));
  const auto& list = pv.signal ? pv.lists.at(static_cast<std::size_t>(cls)) : pv.lists.front();
  std::size_t hits = 0;
  for (const auto& v : list) hits += same_bits(v, content) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(list.size());
}

Eigen::VectorXd GenerativeModel::posterior(const View& v) const {
  const int c = classes();
  Eigen::VectorXd post(c);
  for (int y = 0; y < c; ++y) {
    double p = prior_[static_cast<std::size_t>(y)];
    for (const auto& e : v.entries) p *= likelihood(e.position, y, e.content);
    post[y] = p;
  }
  const double z = post.sum();
  if (!(z > 0.0)) throw ValidationError(kModule, "view has zero probability under the generative model");
  return post / z;
}

void Dataset::validate() const {
  if (n < 2 || s < 1) throw ValidationError(kModule, "dataset needs n >= 2 and s >= 1");
  if (c < 1) throw ValidationError(kModule, "dataset needs at least one class");
  for (const auto& img : images) {
    if (img.n() != n || img.s() != s)
      throw ValidationError(kModule, "image " + std::to_string(img.id) + " has shape " +
                                         std::to_string(img.n()) + "x" + std::to_string(img.s()));
    if (img.label < 0 || img.label >= c)
      throw ValidationError(kModule, "image " + std::to_string(img.id) + " label out of range");
    if (!img.patches.allFinite())
      throw ValidationError(kModule, "image " + std::to_string(img.id) + " has non-finite entries");
  }
}

SyntheticSpec doc2x2_spec() {
  SyntheticSpec spec;
  spec.classes = 2;
  spec.images_per_class = 1;
  spec.n = 2;
  spec.s = 1;
  spec.vocab_size = 2;
  spec.class_signal_positions = {1};
  spec.noise_positions = {0};
  spec.seed = 0;
  auto scalar = [](double x) { return Eigen::VectorXd::Constant(1, x); };
  std::vector<PositionVocab> vocab(2);
  vocab[0].signal = false;
  vocab[0].lists = {{scalar(1.0)}};
  vocab[1].signal = true;
  vocab[1].lists = {{scalar(2.0)}, {scalar(3.0)}};
  spec.vocab = std::move(vocab);
  return spec;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  check_spec(spec);
  Rng rng(spec.seed);

  std::vector<PositionVocab> vocab;
  if (spec.vocab) {
    check_vocab(spec, *spec.vocab);
    vocab = *spec.vocab;
  } else {
    std::set<int> signal(spec.class_signal_positions.begin(), spec.class_signal_positions.end());
    vocab.resize(static_cast<std::size_t>(spec.n));
    for (int p = 0; p < spec.n; ++p) {
      auto& pv = vocab[static_cast<std::size_t>(p)];
      pv.signal = signal.count(p) > 0;
      if (pv.signal) {
        // Contiguous, disjoint per-class slices of one position vocabulary.
        const int size = std::max(spec.vocab_size, spec.classes);
        auto words = draw_vocabulary(size, spec.s, rng);
        pv.lists.resize(static_cast<std::size_t>(spec.classes));
        for (int y = 0; y < spec.classes; ++y) {
          const int lo = y * size / spec.classes;
          const int hi = (y + 1) * size / spec.classes;
          for (int i = lo; i < hi; ++i) pv.lists[static_cast<std::size_t>(y)].push_back(words[static_cast<std::size_t>(i)]);
        }
      } else {
        pv.lists = {draw_vocabulary(spec.vocab_size, spec.s, rng)};
      }
    }
  }

  Dataset ds;
  ds.c = spec.classes;
  ds.n = spec.n;
  ds.s = spec.s;
  std::int64_t id = 0;
  for (int y = 0; y < spec.classes; ++y) {
    for (int i = 0; i < spec.images_per_class; ++i) {
      PatchImage img;
      img.patches.resize(spec.n, spec.s);
      img.label = y;
      img.id = id++;
      for (int p = 0; p < spec.n; ++p) {
        const auto& pv = vocab[static_cast<std::size_t>(p)];
        const auto& list = pv.signal ? pv.lists[static_cast<std::size_t>(y)] : pv.lists.front();
        const auto pick = uniform_index(rng, list.size());
        img.patches.row(p) = list[static_cast<std::size_t>(pick)].transpose();
      }
      ds.images.push_back(std::move(img));
    }
  }
  std::vector<double> prior(static_cast<std::size_t>(spec.classes), 1.0 / spec.classes);
  ds.generative = std::make_shared<GenerativeModel>(std::move(prior), std::move(vocab));
  ds.validate();
  return ds;
}

Dataset parse_cifar10(std::istream& in, std::size_t byte_count, long max_records,
                      int patch_side) {
  if (max_records <= 0) throw ValidationError(kModule, "max_records must be positive");
  if (patch_side < 1 || kCifarSide % patch_side != 0)
    throw ValidationError(kModule, "patch side must divide 32");
  if (byte_count % kCifarRecordBytes != 0)
    throw ValidationError(kModule, "truncated record: file length " + std::to_string(byte_count) +
                                       " is not a multiple of 3073");
  const std::size_t available = byte_count / kCifarRecordBytes;
  const std::size_t count = std::min(available, static_cast<std::size_t>(max_records));
  const int grid = kCifarSide / patch_side;
  const int plane = kCifarSide * kCifarSide;

  Dataset ds;
  ds.c = 10;
  ds.n = grid * grid;
  ds.s = patch_side * patch_side * 3;
  ds.images.reserve(count);
  std::vector<unsigned char> record(kCifarRecordBytes);
  for (std::size_t r = 0; r < count; ++r) {
    in.read(reinterpret_cast<char*>(record.data()), static_cast<std::streamsize>(kCifarRecordBytes));
    if (in.gcount() != static_cast<std::streamsize>(kCifarRecordBytes))
      throw ValidationError(kModule, "truncated record at index " + std::to_string(r));
    if (record[0] > 9)
      throw ValidationError(kModule, "label byte " + std::to_string(record[0]) + " at record " +
                                         std::to_string(r) + " exceeds 9");
    PatchImage img;
    img.label = record[0];
    img.id = static_cast<std::int64_t>(r);
    img.patches.resize(ds.n, ds.s);
    for (int ch = 0; ch < 3; ++ch) {
      for (int row = 0; row < kCifarSide; ++row) {
        for (int col = 0; col < kCifarSide; ++col) {
          const unsigned char byte = record[1 + static_cast<std::size_t>(ch * plane + row * kCifarSide + col)];
          const int patch = (row / patch_side) * grid + col / patch_side;
          const int within = ((row % patch_side) * patch_side + col % patch_side) * 3 + ch;
          img.patches(patch, within) = static_cast<double>(byte) / 255.0;
        }
      }
    }
    ds.images.push_back(std::move(img));
  }
  return ds;
}

Dataset load_cifar10(const std::filesystem::path& path, long max_records, int patch_side) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw ValidationError(kModule, "cannot read " + path.string() + ": " + ec.message());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(kModule, "cannot open " + path.string());
  return parse_cifar10(in, static_cast<std::size_t>(size), max_records, patch_side);
}

void write_cifar10(const Dataset& ds, std::ostream& out, int patch_side) {
  const int grid = kCifarSide / patch_side;
  if (ds.n != grid * grid || ds.s != patch_side * patch_side * 3)
    throw ValidationError(kModule, "dataset shape does not match the CIFAR-10 patch layout");
  const int plane = kCifarSide * kCifarSide;
  std::vector<unsigned char> record(kCifarRecordBytes);
  for (const auto& img : ds.images) {
    if (img.label < 0 || img.label > 9) throw ValidationError(kModule, "label out of CIFAR range");
    record[0] = static_cast<unsigned char>(img.label);
    for (int ch = 0; ch < 3; ++ch) {
      for (int row = 0; row < kCifarSide; ++row) {
        for (int col = 0; col < kCifarSide; ++col) {
          const int patch = (row / patch_side) * grid + col / patch_side;
          const int within = ((row % patch_side) * patch_side + col % patch_side) * 3 + ch;
          const double x = std::clamp(img.patches(patch, within), 0.0, 1.0);
          record[1 + static_cast<std::size_t>(ch * plane + row * kCifarSide + col)] =
              static_cast<unsigned char>(std::lround(x * 255.0));
        }
      }
    }
    out.write(reinterpret_cast<const char*>(record.data()), static_cast<std::streamsize>(record.size()));
  }
}

Dataset quantize(const Dataset& ds, int levels) {
  if (levels < 2) throw ValidationError(kModule, "quantization needs at least 2 levels");
  Dataset out = ds;
  if (ds.empty()) return out;
  double lo = ds.images.front().patches.minCoeff();
  double hi = ds.images.front().patches.maxCoeff();
  for (const auto& img : ds.images) {
    lo = std::min(lo, img.patches.minCoeff());
    hi = std::max(hi, img.patches.maxCoeff());
  }
  if (!(hi > lo)) return out;
  const double step = (hi - lo) / (levels - 1);
  auto level_value = [&](long k) { return k == levels - 1 ? hi : lo + static_cast<double>(k) * step; };
  bool changed = false;
  for (auto& img : out.images) {
    for (Eigen::Index i = 0; i < img.patches.size(); ++i) {
      double& x = img.patches.data()[i];
      long k = static_cast<long>(std::ceil((x - lo) / step - 0.5));
      k = std::clamp(k, 0L, static_cast<long>(levels - 1));
      const double q = level_value(k);
      changed = changed || q != x;
      x = q;
    }
  }
  // The generative posterior describes the raw vocabulary; it only survives a no-op.
  if (changed) out.generative.reset();
  return out;
}

nlohmann::json dataset_to_json(const Dataset& ds) {
  nlohmann::json j;
  j["c"] = ds.c;
  j["n"] = ds.n;
  j["s"] = ds.s;
  auto images = nlohmann::json::array();
  for (const auto& img : ds.images) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(img.patches.size()));
    for (int r = 0; r < img.n(); ++r)
      for (int col = 0; col < img.s(); ++col) flat.push_back(img.patches(r, col));
    images.push_back({{"id", img.id}, {"label", img.label}, {"patches", flat}});
  }
  j["images"] = std::move(images);
  if (ds.generative) {
    nlohmann::json gen;
    gen["prior"] = ds.generative->prior();
    auto positions = nlohmann::json::array();
    for (const auto& pv : ds.generative->vocab()) {
      auto lists = nlohmann::json::array();
      for (const auto& list : pv.lists) {
        auto words = nlohmann::json::array();
        for (const auto& w : list) words.push_back(to_vector(w));
        lists.push_back(std::move(words));
      }
      positions.push_back({{"signal", pv.signal}, {"lists", std::move(lists)}});
    }
    gen["positions"] = std::move(positions);
    j["generative"] = std::move(gen);
  }
  return j;
}

Dataset dataset_from_json(const nlohmann::json& j) {
  Dataset ds;
  try {
    ds.c = j.at("c").get<int>();
    ds.n = j.at("n").get<int>();
    ds.s = j.at("s").get<int>();
    for (const auto& item : j.at("images")) {
      PatchImage img;
      img.id = item.at("id").get<std::int64_t>();
      img.label = item.at("label").get<int>();
      const auto flat = item.at("patches").get<std::vector<double>>();
      if (flat.size() != static_cast<std::size_t>(ds.n) * static_cast<std::size_t>(ds.s))
        throw ValidationError(kModule, "image " + std::to_string(img.id) + " has wrong patch count");
      img.patches.resize(ds.n, ds.s);
      for (int r = 0; r < ds.n; ++r)
        for (int col = 0; col < ds.s; ++col)
          img.patches(r, col) = flat[static_cast<std::size_t>(r * ds.s + col)];
      ds.images.push_back(std::move(img));
    }
    if (j.contains("generative")) {
      const auto& gen = j.at("generative");
      std::vector<PositionVocab> vocab;
      for (const auto& pos : gen.at("positions")) {
        PositionVocab pv;
        pv.signal = pos.at("signal").get<bool>();
        for (const auto& list : pos.at("lists")) {
          std::vector<Eigen::VectorXd> words;
          for (const auto& w : list) words.push_back(from_vector(w.get<std::vector<double>>()));
          pv.lists.push_back(std::move(words));
        }
        vocab.push_back(std::move(pv));
      }
      ds.generative = std::make_shared<GenerativeModel>(gen.at("prior").get<std::vector<double>>(),
                                                        std::move(vocab));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(kModule, std::string("malformed dataset JSON: ") + e.what());
  }
  ds.validate();
  return ds;
}

}  // namespace umae
