// Command-line front end: one verb per pipeline stage.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "wavespoof/config.hpp"
#include "wavespoof/errors.hpp"
#include "wavespoof/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitMissing = 3;
constexpr int kExitNumeric = 4;

struct Options {
  std::string config;
  std::string out = "wavespoof_out";
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string profile = "desk";
};

int run(const std::string& verb, const Options& opt) {
  using namespace wavespoof;
  const PipelineConfig cfg = load_config(opt.profile, opt.config, opt.seed_given ? &opt.seed : nullptr);
  const std::filesystem::path out = opt.out;
  if (verb == "mesh") {
    cmd_mesh(cfg, out, std::cout);
  } else if (verb == "precompute") {
    cmd_precompute(cfg, out, std::cout);
  } else if (verb == "gendata") {
    cmd_gendata(cfg, out, std::cout);
  } else if (verb == "train") {
    cmd_train(cfg, out, std::cout);
  } else if (verb == "attack") {
    cmd_attack(cfg, out, std::cout);
  } else if (verb == "evaluate") {
    cmd_evaluate(cfg, out, std::cout);
  } else if (verb == "bench") {
    cmd_bench(cfg, out, std::cout);
  } else if (verb == "config") {
    std::cout << to_text(cfg);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial interference synthesis through a simulated acoustic channel"};
  app.require_subcommand(1);
  Options opt;
  const std::pair<const char*, const char*> verbs[] = {
      {"mesh", "Triangulate the domain"},
      {"precompute", "Factorize once and build the detector Green operators and band projector"},
      {"gendata", "Generate noisy spectrogram datasets"},
      {"train", "Train the spectrogram classifier"},
      {"attack", "Synthesize interference for every validation example"},
      {"evaluate", "Accuracy with and without interference"},
      {"bench", "Time naive versus precomputed objective and gradient"},
      {"config", "Print the effective configuration"},
  };
  for (const auto& [name, help] : verbs) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "Artifact directory")->capture_default_str();
    sub->add_option("--seed", opt.seed, "Root seed (overrides the config)");
    sub->add_option("--profile", opt.profile, "Default profile")
        ->check(CLI::IsMember({"desk", "paper"}))
        ->capture_default_str();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  const std::string verb = app.get_subcommands().front()->get_name();
  opt.seed_given = app.get_subcommands().front()->count("--seed") > 0;
  try {
    return run(verb, opt);
  } catch (const wavespoof::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const wavespoof::MissingArtifact& e) {
    std::cerr << "missing artifact: " << e.what() << '\n';
    return kExitMissing;
  } catch (const wavespoof::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
