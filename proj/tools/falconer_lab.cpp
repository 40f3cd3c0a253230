// Command-line front end for the experiment harness.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <map>
#include <string>

#include "falconer/experiments.hpp"

int main(int argc, char** argv) {
  using namespace falconer::lab;

  CLI::App app{"Numerical laboratory for restricted Falconer distance problems"};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_extras();

  RunRequest request;
  std::uint64_t seed = 0;
  app.add_option("--config", request.config_path, "key = value config file");
  app.add_option("--out", request.out_dir, "output directory")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed, "override the config seed (u64)");
  app.footer("Environment: FALCONER_LAB_THREADS caps the worker count.\n"
             "Exit status: 0 pass, 2 failed verdict, 1 error.");

  // Values land here keyed by subcommand then key; only options given on the
  // command line become overrides.
  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, std::map<std::string, CLI::Option*>> options;
  for (const auto& info : experiments()) {
    auto* sub = app.add_subcommand(info.name, info.summary);
    sub->allow_extras();  // unknown --keys go to the harness for a nearest-key message
    for (const auto& key : info.keys) {
      std::string help = key.help;
      if (key.required) help += " [required]";
      else if (!key.fallback.empty()) help += " [default " + key.fallback + "]";
      options[info.name][key.name] = sub->add_option("--" + key.name, values[info.name][key.name], help);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  for (auto* sub : app.get_subcommands()) {
    request.subcommand = sub->get_name();
    for (const auto& [key, opt] : options[request.subcommand])
      if (opt->count() > 0) request.overrides[key] = values[request.subcommand][key];
    auto extras = app.remaining(true);
    for (std::size_t i = 0; i < extras.size(); ++i) {
      const std::string& token = extras[i];
      if (token.rfind("--", 0) != 0) {
        std::cerr << "error: unexpected argument `" << token << "`\n";
        return 1;
      }
      std::string key = token.substr(2), value;
      if (auto eq = key.find('='); eq != std::string::npos) {
        value = key.substr(eq + 1);
        key.resize(eq);
      } else if (i + 1 < extras.size() && extras[i + 1].rfind("--", 0) != 0) {
        value = extras[++i];
      }
      request.overrides[key] = value;
    }
  }
  if (seed_opt->count() > 0) request.seed = seed;
  return run(request, std::cout, std::cerr);
}
