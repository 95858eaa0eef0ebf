// umae_lab: experiment driver for the masked-autoencoder / contrastive lab.
//
//   umae_lab <generate|graph|train|verify|sweep|probe|report>
//            [--config FILE] [--set key.path=value]... [--out DIR]
//            [--threads N] [--artifact FILE]...
//
// Exit status: 0 success, 1 invalid input or configuration, 2 numerical failure.

#ifdef UMAE_CLI11_SINGLE_HEADER
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "commands.hpp"
#include "config.hpp"
#include "output.hpp"
#include "umae/error.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

nlohmann::json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw umae::ValidationError("config", "cannot open config file " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw umae::ValidationError("config", "config file " + path + " is not valid JSON");
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked-autoencoder / contrastive-learning theory lab"};
  std::string command;
  std::string config_path;
  std::vector<std::string> overrides;
  std::vector<std::string> artifacts;
  std::string out_dir;
  int threads = 1;
  app.add_option("command", command, "generate | graph | train | verify | sweep | probe | report")
      ->required()
      ->check(CLI::IsMember({"generate", "graph", "train", "verify", "sweep", "probe", "report"}));
  app.add_option("--config", config_path, "experiment config (JSON)");
  app.add_option("--set", overrides, "override a config value, e.g. --set mask.rho=0.75")->allow_extra_args(false);
  app.add_option("--out", out_dir, "output directory (overrides the config's output)");
  app.add_option("--threads", threads, "worker threads for sweeps")->envname("UMAE_LAB_THREADS")->check(CLI::PositiveNumber);
  app.add_option("--artifact", artifacts, "input file for report (repeatable)")->allow_extra_args(false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    nlohmann::json doc = config_path.empty() ? nlohmann::json::object() : load_config_file(config_path);
    for (const auto& o : overrides) umae::lab::apply_override(doc, o);
    if (!out_dir.empty()) doc["output"] = out_dir;
    if (!artifacts.empty()) doc["report"]["artifacts"] = artifacts;

    umae::lab::RunContext ctx;
    ctx.config = umae::lab::parse_config(doc);
    ctx.threads = threads;
    if (command != "report") {
      ctx.dataset = umae::lab::load_dataset(ctx.config.dataset);
      umae::lab::resolve(ctx.config, ctx.dataset);
    }
    ctx.resolved = umae::lab::to_json(ctx.config);

    umae::lab::OutputSet out(ctx.config.output);
    const int status = umae::lab::run_command(command, ctx, out, std::cout);
    out.add("config.resolved.json", umae::lab::dump(ctx.resolved));
    out.commit();
    for (const auto& [name, content] : out.files()) std::cout << "wrote " << (out.dir() / name).string() << "\n";
    return status;
  } catch (const umae::NumericalError& e) {
    std::cerr << "umae_lab: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const umae::ValidationError& e) {
    std::cerr << "umae_lab: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "umae_lab: " << e.what() << "\n";
    return kExitValidation;
  }
}
