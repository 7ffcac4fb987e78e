#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace transonic;
using namespace transonic::cli;

namespace {

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::validation:
    case ErrorKind::invalid_geometry:
    case ErrorKind::unsupported_geometry:
    case ErrorKind::dimension:
    case ErrorKind::inadmissible_data:
    case ErrorKind::grid_incompatibility:
    case ErrorKind::compatibility:
    case ErrorKind::invalid_source:
    case ErrorKind::data_inconsistency:
      return 2;
    default:
      return 3;
  }
}

void error_record(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transonic duct flow solver"};
  app.require_subcommand(1);
  std::string config;
  RunOptions opt;
  std::string out = "out";
  auto add = [&](const char* name, const char* help, bool needs_config = true) {
    auto* sc = app.add_subcommand(name, help);
    auto* c = sc->add_option("--config", config, "JSON run configuration");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    sc->add_option("--out", out, "output directory")->capture_default_str();
    sc->add_option("--threads", opt.threads, "worker threads")->capture_default_str()->check(CLI::Range(1u, 256u));
    sc->add_option("--seed", opt.seed, "reserved");
    return sc;
  };
  auto* bg = add("background", "background flow profile and admissibility margins");
  auto* pot = add("solve-potential", "irrotational transonic solve");
  auto* bel = add("solve-beltrami", "Beltrami transonic solve");
  auto* ver = add("verify", "property suite");
  auto* rep = add("report", "re-render report.json of an output directory", false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    error_record("validation", e.what(), 2);
    return 2;
  }

  try {
    opt.out = out;
    std::filesystem::create_directories(opt.out);
    if (rep->parsed()) {
      report_command(opt);
      return 0;
    }
    const RunConfig c = load_config(config);
    if (bg->parsed()) background_command(c, opt);
    if (pot->parsed()) potential_command(c, opt);
    if (bel->parsed()) beltrami_command(c, opt);
    if (ver->parsed()) verify_command(c, opt);
  } catch (const Error& e) {
    const int code = exit_code(e.kind());
    error_record(to_string(e.kind()), e.what(), code);
    return code;
  } catch (const VerificationFailure& e) {
    error_record("verification", e.what(), 4);
    return 4;
  } catch (const std::exception& e) {
    error_record("io", e.what(), 2);
    return 2;
  }
  return 0;
}
