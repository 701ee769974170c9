// Command-line front end; everything goes through the C API.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pbs/pbs.h"

namespace {

using json = nlohmann::json;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<double> alpha;
  std::optional<std::string> out;
  std::optional<std::string> model;
  std::vector<std::string> sets;
};

void add_common(CLI::App* sub, Overrides& o, bool with_model) {
  sub->add_option("-c,--config", o.config_path, "JSON configuration file")->required();
  sub->add_option("--seed", o.seed, "master seed");
  sub->add_option("--threads", o.threads, "worker threads");
  sub->add_option("--alpha", o.alpha, "interval level is 1 - alpha");
  sub->add_option("-o,--out", o.out, "output directory");
  if (with_model) sub->add_option("--model", o.model, "model.json written by fit");
  sub->add_option("--set", o.sets, "override a config entry: dotted.key=<json>");
}

// Returns a process exit code, or -1 when the merged config is ready.
int merge(const Overrides& o, json& cfg) {
  std::ifstream in(o.config_path);
  if (!in) {
    std::cerr << "error: cannot open " << o.config_path << "\n";
    return 3;
  }
  std::stringstream text;
  text << in.rdbuf();
  try {
    cfg = json::parse(text.str());
  } catch (const json::exception& e) {
    std::cerr << "error: " << o.config_path << ": " << e.what() << "\n";
    return 2;
  }
  if (!cfg.is_object()) {
    std::cerr << "error: configuration must be a JSON object\n";
    return 2;
  }
  if (o.seed) cfg["seed"] = *o.seed;
  if (o.threads) cfg["threads"] = *o.threads;
  if (o.alpha) cfg["alpha"] = *o.alpha;
  if (o.out) cfg["out"] = *o.out;
  if (o.model) cfg["model"] = *o.model;
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "error: --set expects key=value, got '" << s << "'\n";
      return 2;
    }
    std::string pointer = "/" + s.substr(0, eq);
    for (auto& ch : pointer)
      if (ch == '.') ch = '/';
    json value;
    try {
      value = json::parse(s.substr(eq + 1));
    } catch (const json::exception&) {
      value = s.substr(eq + 1);
    }
    cfg[json::json_pointer(pointer)] = value;
  }
  return -1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parametric bootstrap smoothing of ridge regression with model selection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pbs_version());

  Overrides o;
  const std::vector<std::pair<const char*, const char*>> commands{
      {"fit", "select the resampling distribution, fit, and write prediction intervals"},
      {"predict", "predict new rows from a saved model (matrix data)"},
      {"select-dist", "cross-validate the resampling variance and mixing weight"},
      {"sweep-sigma", "out-of-sample accuracy over fixed resampling variances"},
      {"simulate", "run the nested-model simulation study"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), o, std::string(name) == "predict");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  json cfg;
  if (const int rc = merge(o, cfg); rc >= 0) return rc;

  const std::string command = app.get_subcommands().front()->get_name();
  char* message = nullptr;
  const pbs_status status = pbs_run_command(command.c_str(), cfg.dump().c_str(), &message);
  if (status == PBS_OK) {
    std::cout << (message ? message : "") << "\n";
  } else {
    std::cerr << "error: " << (message ? message : pbs_last_error()) << "\n";
  }
  pbs_string_free(message);
  return pbs_status_exit_code(status);
}
