// magloc: synthesize, ingest, train on and evaluate magnetometer location-type data.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "magloc/eval.hpp"
#include "magloc/io/csv.hpp"
#include "magloc/io/files.hpp"
#include "magloc/io/json.hpp"
#include "magloc/synthgen.hpp"

namespace fs = std::filesystem;
using namespace magloc;

namespace {

struct flags {
  std::string config;
  std::string input;
  std::string out = "out";
  std::optional<std::string> method;
  std::optional<std::string> protocol_name;
  std::optional<std::string> domain;
  std::optional<std::uint64_t> seed;
};

struct run_config {
  std::string command;
  std::string input;
  std::string output;
  std::string method = "shapelet:rf";
  std::string protocol_name = "lpo";
  std::string domain = "time";
  std::uint64_t seed = 0;
  pipeline_config pipeline;
  synth_spec synth;

  json to_json() const {
    return {{"command", command}, {"input", input},   {"output", output}, {"method", method},
            {"protocol", protocol_name}, {"domain", domain}, {"seed", seed},  {"pipeline", pipeline},
            {"synth", synth}};
  }
};

// Config file first, then command-line flags on top.
run_config resolve(const std::string& command, const flags& f) {
  json file = json::object();
  if (!f.config.empty()) file = io::parse_text(io::read_file(f.config), f.config);
  io::detail::check_keys(file, {"command", "input", "output", "method", "protocol", "domain", "seed", "pipeline", "synth"},
                         "run config");
  run_config rc;
  try {
    rc.command = command;
    rc.input = f.input.empty() ? file.value("input", std::string()) : f.input;
    rc.output = f.out;
    rc.method = f.method.value_or(file.value("method", rc.method));
    rc.protocol_name = f.protocol_name.value_or(file.value("protocol", rc.protocol_name));
    rc.domain = f.domain.value_or(file.value("domain", rc.domain));
    rc.seed = f.seed.value_or(file.value("seed", rc.seed));
    if (file.contains("pipeline")) rc.pipeline = file.at("pipeline").get<pipeline_config>();
    rc.synth = synth_spec_from_json(file.value("synth", json::object()), rc.seed);
  } catch (const json::exception& e) {
    fail(errc::configuration, std::string("run config: ") + e.what());
  }
  parse_protocol(rc.protocol_name);
  check_supported(parse_method(rc.method), parse_signal_domain(rc.domain));
  return rc;
}

dataset load_or_generate(const run_config& rc) {
  if (rc.input.empty()) return generate(rc.synth);
  const auto result = io::ingest_csv_text(io::read_file(rc.input));
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  return result.data;
}

void write_run_config(const run_config& rc) {
  io::write_file_atomic(fs::path(rc.output) / "run_config.json", io::dump(rc.to_json()));
}

void print_summary(const evaluation_report& r) {
  std::printf("method %s  protocol %s  domain %s  seed %llu\n", r.method.text.c_str(), to_string(r.protocol_used),
              to_string(r.domain), static_cast<unsigned long long>(r.seed));
  std::printf("balanced accuracy: %.4f (observations)  %.4f (segments)\n", r.balanced_accuracy,
              r.segment_balanced_accuracy);
  std::cout << render_confusion(r.observation_confusion);
}

int cmd_synth(const run_config& rc) {
  const auto d = generate(rc.synth);
  const auto path = fs::path(rc.output) / "dataset.csv";
  io::write_file_atomic(path, io::emit_csv(d));
  write_run_config(rc);
  std::printf("wrote %zu observations, %zu classes to %s\n", d.size(), d.class_set().size(), path.c_str());
  return 0;
}

int cmd_ingest(const run_config& rc) {
  if (rc.input.empty()) fail(errc::configuration, "ingest needs --input <csv>");
  const auto result = io::ingest_csv_text(io::read_file(rc.input));
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  const auto& d = result.data;
  json summary = {{"input", rc.input}, {"observations", d.size()}, {"class_set", d.class_set()}, {"warnings", result.warnings}};
  json obs = json::array();
  for (const auto& o : d.observations())
    obs.push_back({{"device_id", o.device_id()},
                   {"location_id", o.location_id()},
                   {"location_type", o.location_type()},
                   {"start_time", o.start_time()},
                   {"samples", o.size()}});
  summary["traces"] = obs;
  io::write_file_atomic(fs::path(rc.output) / "ingest.json", io::dump(summary));
  std::printf("ingested %zu observations, %zu classes, %zu warnings\n", d.size(), d.class_set().size(),
              result.warnings.size());
  return 0;
}

int cmd_evaluate(const run_config& rc) {
  const auto d = load_or_generate(rc);
  const auto r = run_protocol(d, parse_protocol(rc.protocol_name), parse_method(rc.method), parse_signal_domain(rc.domain),
                              rc.pipeline, rc.seed);
  const fs::path out(rc.output);
  io::write_file_atomic(out / "report.json", io::dump(report_json(r, rc.to_json())));
  io::write_file_atomic(out / "confusion.txt", render_confusion(r.observation_confusion));
  print_summary(r);
  return 0;
}

int cmd_train(const run_config& rc) {
  const auto d = load_or_generate(rc);
  const auto p = fit_on_dataset(d, parse_method(rc.method), parse_signal_domain(rc.domain), rc.pipeline, rc.seed);
  const fs::path out(rc.output);
  io::save_pipeline(out / "pipeline.json", p);
  io::save_model(out / "model.json", p.model);
  if (p.dictionary) io::save_dictionary(out / "dictionary.json", *p.dictionary);
  if (p.net) io::save_network(out / "network.json", *p.net);
  write_run_config(rc);
  std::printf("trained %s on %zu observations", rc.method.c_str(), d.size());
  if (p.dictionary) std::printf(", %zu shapelets", p.dictionary->entries.size());
  std::printf("\n");
  return 0;
}

int cmd_report(const flags& f) {
  if (f.input.empty()) fail(errc::configuration, "report needs --input <report.json>");
  const auto j = io::parse_text(io::read_file(f.input), f.input);
  evaluation_report r;
  try {
    r = report_from_json(j);
  } catch (const json::exception& e) {
    fail(errc::parse, "'" + f.input + "' is not an evaluation report: " + e.what());
  }
  if (r.balanced_accuracy != j.at("balanced_accuracy").get<double>())
    fail(errc::data, "stored balanced accuracy does not match the stored predictions");
  io::write_file_atomic(fs::path(f.out) / "confusion.txt", render_confusion(r.observation_confusion));
  print_summary(r);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Location-type classification from magnetometer traces"};
  app.require_subcommand(1);
  flags f;
  auto add_common = [&](CLI::App* c, bool method_flags) {
    c->add_option("--config", f.config, "JSON run configuration");
    c->add_option("--input,-i", f.input, "input file");
    c->add_option("--out,-o", f.out, "output directory");
    c->add_option("--seed", f.seed, "master seed");
    if (method_flags) {
      c->add_option("--method", f.method, "method spec, e.g. shapelet:rf, match-dtw, siamese-c3");
      c->add_option("--protocol", f.protocol_name, "evaluation protocol")->check(CLI::IsMember({"all", "lpo", "ldo"}));
      c->add_option("--domain", f.domain, "signal domain")->check(CLI::IsMember({"time", "frequency"}));
    }
  };
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset as CSV");
  auto* ingest = app.add_subcommand("ingest", "validate a CSV dataset and summarize it");
  auto* evaluate = app.add_subcommand("evaluate", "run an evaluation protocol and write a report");
  auto* train = app.add_subcommand("train", "fit a pipeline on a whole dataset and save it");
  auto* report = app.add_subcommand("report", "recompute and render a stored report");
  add_common(synth, false);
  add_common(ingest, false);
  add_common(evaluate, true);
  add_common(train, true);
  add_common(report, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(exit_category::config);
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    if (command == "report") return cmd_report(f);
    const auto rc = resolve(command, f);
    if (command == "synth") return cmd_synth(rc);
    if (command == "ingest") return cmd_ingest(rc);
    if (command == "evaluate") return cmd_evaluate(rc);
    return cmd_train(rc);
  } catch (const magloc::error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return static_cast<int>(category_of(e.code()));
  } catch (const json::exception& e) {
    std::cerr << "error [configuration]: " << e.what() << "\n";
    return static_cast<int>(exit_category::config);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error [data]: " << e.what() << "\n";
    return static_cast<int>(exit_category::data);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return static_cast<int>(exit_category::internal);
  }
}
