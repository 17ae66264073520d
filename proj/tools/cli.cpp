#include "mnn/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "mnn/core.hpp"
#include "mnn/document.hpp"
#include "mnn/gates.hpp"
#include "mnn/mechanics.hpp"
#include "mnn/server.hpp"
#include "mnn/service.hpp"
#include "mnn/training.hpp"

namespace mnn::cli {
namespace {

namespace fs = std::filesystem;

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v == 0.0 ? 0.0 : v);
  return buf;
}

std::string f4(double v) { return fmt("%.4f", v); }

struct Options {
  std::string file;
  std::optional<std::uint64_t> seed;
  std::string output;

  std::string eval_doc;
  std::vector<double> inputs;

  std::string verify_kind;
  bool figure_weights = false;
  std::optional<double> threshold;

  std::string train_target;
  std::size_t seed_sweep = 0;
  std::string from;
  double lr = 0.1;
  std::size_t epochs = 5000;
  double tolerance = 0.05;
  bool no_shuffle = false;
  std::string loss_log;

  std::string sheet_doc;
  std::string import_sheet;

  std::size_t samples = 41;

  std::string host = "127.0.0.1";
  int port = 8080;

  std::string plot_log;
  std::size_t every = 1;

  std::string new_gate;
  std::vector<std::size_t> new_layers;
};

class Runner {
 public:
  Runner(const Options& o, std::ostream& out, std::ostream& err) : o_(o), out_(out), err_(err) {}

  int eval();
  int verify();
  int train();
  int buildsheet();
  int activation();
  int serve();
  int plot_data();
  int make_new();

 private:
  std::string document_path(const std::string& positional) const {
    const std::string& p = positional.empty() ? o_.file : positional;
    if (p.empty()) throw ParseError("no network document given (positional argument or --file)");
    return p;
  }

  void print_report(const gates::GateReport& r, const std::string& title);
  void write_or_print(const std::string& text);

  const Options& o_;
  std::ostream& out_;
  std::ostream& err_;
};

int Runner::eval() {
  const auto doc = load_document(document_path(o_.eval_doc));
  const Network& net = doc.network;
  if (o_.inputs.size() != net.free_input_count()) {
    throw ShapeError("expected " + std::to_string(net.free_input_count()) + " --input values, got " +
                     std::to_string(o_.inputs.size()));
  }
  const auto trace = forward(net, o_.inputs);
  const std::size_t L = net.layer_count();

  char line[128];
  std::snprintf(line, sizeof line, "%-8s %9s %9s  %s\n", "neuron", "net", "out", "slack");
  out_ << line;
  for (std::size_t k = 0; k < L; ++k) {
    for (std::size_t i = 0; i < trace.layers[k].size(); ++i) {
      const auto& n = trace.layers[k][i];
      const std::string label = mechanics::lever_label(L, k, i);
      const std::string net_s = n.net ? f4(*n.net) : "-";
      std::string slack = k == 0 ? "-" : (n.slack ? "yes" : "no");
      if (k == 0 && net.is_pinned(i)) slack = "pinned";
      std::snprintf(line, sizeof line, "%-8s %9s %9s  %s\n", label.c_str(), net_s.c_str(), f4(n.out).c_str(),
                    slack.c_str());
      out_ << line;
    }
  }
  out_ << "output";
  const auto y = trace.output();
  for (std::size_t i = 0; i < y.size(); ++i) out_ << ' ' << mechanics::lever_label(L, L - 1, i) << '=' << f4(y[i]);
  out_ << '\n';
  return kOk;
}

void Runner::print_report(const gates::GateReport& r, const std::string& title) {
  out_ << title << "  threshold " << f4(r.threshold) << '\n';
  const std::size_t arity = r.rows.empty() ? 0 : r.rows.front().inputs.size();
  for (std::size_t j = 0; j < arity; ++j) out_ << " x" << j + 1;
  out_ << "       raw  out  expected  result\n";
  for (const auto& row : r.rows) {
    for (bool b : row.inputs) out_ << "  " << (b ? 1 : 0);
    char line[96];
    std::snprintf(line, sizeof line, "  %8s  %3d  %8d  %s\n", f4(row.raw).c_str(), row.actual ? 1 : 0,
                  row.expected ? 1 : 0, row.pass ? "pass" : "FAIL");
    out_ << line;
  }
  out_ << r.pass_count() << '/' << r.rows.size() << " rows pass\n";
}

int Runner::verify() {
  const auto kind = gates::parse_gate_kind(o_.verify_kind);
  if (!kind) throw ParseError("unknown gate '" + o_.verify_kind + "' (and, or, not, xor)");

  gates::GateReport report;
  std::string title = "verify " + std::string(gates::to_string(*kind));
  if (!o_.file.empty()) {
    const auto doc = load_document(o_.file);
    double t = gates::make_gate(*kind).threshold;
    if (doc.gate && doc.gate->kind == *kind) t = doc.gate->threshold;
    if (o_.threshold) t = *o_.threshold;
    report = gates::verify_gate(doc.network, *kind, t);
    title += " (" + o_.file + ")";
  } else if (o_.figure_weights) {
    if (*kind != gates::GateKind::Not) throw ParseError("--figure-weights only applies to 'not'");
    auto spec = gates::make_not_gate_figure_labels();
    if (o_.threshold) spec.threshold = *o_.threshold;
    report = gates::verify_gate(spec);
    title += " (figure-label weights x1 +1, pin -1)";
  } else {
    auto spec = gates::make_gate(*kind);
    if (o_.threshold) spec.threshold = *o_.threshold;
    report = gates::verify_gate(spec);
  }
  print_report(report, title);

  if (*kind == gates::GateKind::Not && o_.file.empty()) {
    // The two sign conventions for the NOT figure disagree; always show the other one.
    if (o_.figure_weights) {
      out_ << "note: with the labels as drawn the hidden lever computes x1 - 1, which is never positive,\n"
              "      so y stays 0 and the x1=0 row fails. The shipped weights (x1 -1, pin +1) compute 1 - x1.\n";
    } else {
      out_ << "note: the figure labels (x1 +1, pin -1) would give the following; shipped weights flip both signs.\n";
      print_report(gates::verify_gate(gates::make_not_gate_figure_labels()), "verify not (figure-label weights)");
    }
  }
  return report.passed() ? kOk : kCheckFailed;
}

int Runner::train() {
  training::Dataset data;
  if (auto named = training::named_dataset(o_.train_target)) {
    data = *named;
  } else if (fs::is_regular_file(o_.train_target)) {
    data = load_dataset(o_.train_target);
  } else {
    throw ParseError("no dataset named or found at '" + o_.train_target + "' (and, or, not, xor, mean, or a file)");
  }

  training::TrainConfig cfg;
  cfg.learning_rate = o_.lr;
  cfg.epochs = o_.epochs;
  cfg.seed = o_.seed.value_or(1);
  cfg.shuffle = !o_.no_shuffle;
  cfg.regression_tolerance = o_.tolerance;
  cfg.validate();

  std::optional<NetworkDocument> from;
  if (!o_.from.empty()) {
    from = load_document(o_.from);
    if (from->gate && data.readout_threshold) data.readout_threshold = from->gate->threshold;
  }
  const Network topology = from ? from->network : training::default_topology(data);
  data.validate_for(topology);

  out_ << "dataset " << data.name << ", " << data.samples.size() << " samples, layers";
  for (auto n : topology.layer_sizes()) out_ << ' ' << n;
  out_ << "\nlr " << f4(cfg.learning_rate) << ", epochs " << cfg.epochs << ", seed " << cfg.seed << '\n';

  training::TrainRun best;
  bool any = false;
  if (from) {
    const double l0 = training::dataset_loss(topology, data);
    const bool ok0 = training::is_success(topology, data, cfg);
    out_ << "start: loss " << fmt("%.6f", l0) << ", success " << (ok0 ? "yes" : "no") << '\n';
    if (ok0) {
      out_ << "starting network already solves " << data.name << "; weights left unchanged\n";
      best.initial_loss = l0;
      best.initial_success = true;
      best.network = topology;
      best.seed = cfg.seed;
      best.success = true;
    } else {
      best = training::train(topology, data, cfg);
    }
    any = best.success;
  } else if (o_.seed_sweep > 0) {
    const auto sweep = training::train_restarts(topology, data, cfg, o_.seed_sweep);
    for (const auto& r : sweep.runs) {
      out_ << "seed " << r.seed << "  final loss " << fmt("%.6f", r.epoch_loss.empty() ? r.initial_loss : r.epoch_loss.back())
           << "  success " << (r.success ? "yes" : "no") << '\n';
    }
    if (sweep.first_success) {
      out_ << "first successful seed: " << sweep.runs[*sweep.first_success].seed << '\n';
    } else {
      out_ << "no seed succeeded\n";
    }
    best = sweep.best();
    any = sweep.first_success.has_value();
  } else {
    best = training::train(training::initialize(topology, cfg.init_range, cfg.seed), data, cfg);
    any = best.success;
  }

  const double final_loss = best.epoch_loss.empty() ? best.initial_loss : best.epoch_loss.back();
  out_ << "result: seed " << best.seed << ", final loss " << fmt("%.6f", final_loss) << ", success "
       << (best.success ? "yes" : "no") << '\n';

  NetworkDocument doc;
  doc.network = best.network;
  doc.name = data.name + " trained";
  doc.description = "seed " + std::to_string(best.seed) + ", lr " + fmt("%g", cfg.learning_rate) + ", epochs " +
                    std::to_string(best.epoch_loss.size());
  if (data.readout_threshold) {
    doc.thresholds.assign(best.network.output_count(), *data.readout_threshold);
    if (const auto kind = gates::parse_gate_kind(data.name);
        kind && best.network.free_input_count() == gates::arity(*kind)) {
      doc.gate = GateBlock{*kind, *data.readout_threshold};
    }
  }

  const std::string net_path = o_.output.empty() ? data.name + ".trained.net" : o_.output;
  std::string log_path = o_.loss_log;
  if (log_path.empty()) log_path = fs::path(net_path).replace_extension(".loss").string();
  save_document(net_path, doc);
  write_text_file(log_path, training::format_loss_log(best));
  out_ << "wrote " << net_path << " and " << log_path << '\n';
  return any ? kOk : kCheckFailed;
}

void Runner::write_or_print(const std::string& text) {
  if (o_.output.empty()) {
    out_ << text;
  } else {
    write_text_file(o_.output, text);
    out_ << "wrote " << o_.output << '\n';
  }
}

int Runner::buildsheet() {
  if (!o_.import_sheet.empty()) {
    const auto sheet = mechanics::parse_build_sheet(read_text_file(o_.import_sheet));
    NetworkDocument doc;
    doc.network = mechanics::network_from_build_sheet(sheet);
    doc.name = fs::path(o_.import_sheet).stem().string();
    write_or_print(serialize_document(doc));
    return kOk;
  }
  const auto doc = load_document(document_path(o_.sheet_doc));
  write_or_print(mechanics::format_build_sheet(mechanics::export_build_sheet(doc.network)));
  return kOk;
}

int Runner::activation() {
  if (o_.samples < 2) throw RangeError("--samples must be at least 2");
  const auto n = static_cast<double>(o_.samples - 1);
  std::string text = "x,phi\n";
  for (std::size_t i = 0; i < o_.samples; ++i) {
    // Mix the endpoints so that grid points like 0 and 1 come out exact.
    const double x = (-2.0 * (n - static_cast<double>(i)) + 2.0 * static_cast<double>(i)) / n;
    text += f4(x) + ',' + f4(dorelu(x)) + '\n';
  }
  write_or_print(text);
  return kOk;
}

int Runner::serve() {
  service::SessionManager sessions;
  service::Server server(sessions);
  if (!server.bind(o_.host, o_.port)) {
    err_ << "cannot bind " << o_.host << ':' << o_.port << '\n';
    return kBadInput;
  }
  out_ << "listening on http://" << o_.host << ':' << o_.port << "/v1" << std::endl;
  server.listen_after_bind();
  return kOk;
}

int Runner::plot_data() {
  if (o_.every == 0) throw RangeError("--every must be at least 1");
  const auto points = training::parse_loss_log(read_text_file(o_.plot_log));
  std::string text = "# epoch loss\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i % o_.every != 0 && i + 1 != points.size()) continue;
    text += std::to_string(points[i].first) + ' ' + fmt("%.9g", points[i].second) + '\n';
  }
  write_or_print(text);
  return kOk;
}

int Runner::make_new() {
  NetworkDocument doc;
  if (!o_.new_gate.empty()) {
    const auto kind = gates::parse_gate_kind(o_.new_gate);
    if (!kind) throw ParseError("unknown gate '" + o_.new_gate + "' (and, or, not, xor)");
    doc = gate_document(gates::make_gate(*kind));
  } else {
    doc.network = Network::zeros(o_.new_layers);
    std::string name = "zero";
    for (auto n : o_.new_layers) name += '-' + std::to_string(n);
    doc.name = name;
  }
  write_or_print(serialize_document(doc));
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Mechanical neural network simulator", "mnn"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--file", o.file, "Network document (.net)");
  app.add_option("--seed", o.seed, "Random seed (default 1)");
  app.add_option("--output", o.output, "Write the result here instead of stdout");

  auto* eval = app.add_subcommand("eval", "Forward pass with a per-neuron net/out/slack table");
  eval->add_option("document", o.eval_doc, "Network document");
  eval->add_option("--input", o.inputs, "Free input values in [-1, 1]")->required();

  auto* verify = app.add_subcommand("verify", "Check a gate against its truth table");
  verify->add_option("kind", o.verify_kind, "and | or | not | xor")->required();
  verify->add_flag("--figure-weights", o.figure_weights, "NOT: use the sign labels as drawn");
  verify->add_option("--threshold", o.threshold, "Readout threshold override");

  auto* train = app.add_subcommand("train", "Projected SGD on a named or file dataset");
  train->add_option("dataset", o.train_target, "and | or | not | xor | mean | dataset file")->required();
  train->add_option("--seed-sweep", o.seed_sweep, "Restart from seeds seed..seed+N-1");
  train->add_option("--from", o.from, "Start from this network document");
  train->add_option("--lr", o.lr, "Learning rate");
  train->add_option("--epochs", o.epochs, "Epochs per run");
  train->add_option("--tolerance", o.tolerance, "Success tolerance for regression targets");
  train->add_flag("--no-shuffle", o.no_shuffle, "Keep sample order fixed");
  train->add_option("--loss-log", o.loss_log, "Loss log path (default: output with .loss)");

  auto* sheet = app.add_subcommand("buildsheet", "Clamp positions for the physical model");
  sheet->add_option("document", o.sheet_doc, "Network document");
  sheet->add_option("--import", o.import_sheet, "Read a build sheet and emit its network document");

  auto* act = app.add_subcommand("activation", "Sample the activation over [-2, 2]");
  act->add_option("--samples", o.samples, "Number of evenly spaced points (>= 2)");

  auto* serve = app.add_subcommand("serve", "Run the session service");
  serve->add_option("--host", o.host, "Bind address");
  serve->add_option("--port", o.port, "Port");

  auto* plot = app.add_subcommand("plot-data", "Turn a loss log into two-column plot data");
  plot->add_option("log", o.plot_log, "Loss log")->required();
  plot->add_option("--every", o.every, "Keep every Nth epoch (the last is always kept)");

  auto* make = app.add_subcommand("new", "Emit a canonical gate or an all-zero network document");
  auto* gate_opt = make->add_option("--gate", o.new_gate, "and | or | not | xor");
  make->add_option("--layers", o.new_layers, "Layer sizes for an all-zero network")->excludes(gate_opt);
  make->require_option(1);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kBadInput;
  }

  Runner r(o, out, err);
  try {
    if (*eval) return r.eval();
    if (*verify) return r.verify();
    if (*train) return r.train();
    if (*sheet) return r.buildsheet();
    if (*act) return r.activation();
    if (*serve) return r.serve();
    if (*plot) return r.plot_data();
    if (*make) return r.make_new();
  } catch (const training::DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kDiverged;
  } catch (const RangeError& e) {
    err << "error: " << e.what() << '\n';
    return kOutOfRange;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kOutOfRange;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kBadInput;
  }
  return kBadInput;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace mnn::cli
