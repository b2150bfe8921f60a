// Command-line front end: analyze, simulate, generate.
//
// Exit codes: 0 analysis completed, 2 undecided verdicts present, 1 input error.

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "singlq/singlq.hpp"

namespace fs = std::filesystem;
using namespace singlq;

namespace {

constexpr int kExitDone = 0;
constexpr int kExitInputError = 1;
constexpr int kExitUndecided = 2;

struct NumericFlags {
  std::optional<double> rank_tol, residual_tol, conv_tol, max_time;

  void attach(CLI::App* app) {
    app->add_option("--rank-tol", rank_tol, "relative singular-value cutoff");
    app->add_option("--residual-tol", residual_tol, "Riccati residual tolerance");
    app->add_option("--conv-tol", conv_tol, "Riccati flow convergence threshold");
    app->add_option("--max-time", max_time, "Riccati flow horizon cap");
  }

  Tolerances tolerances(const ProblemDocument& doc) const {
    Tolerances t = doc.tolerances.value_or(Tolerances{});
    if (rank_tol) t.rank_tol = *rank_tol;
    if (residual_tol) t.residual_tol = *residual_tol;
    return t;
  }

  RdeOptions rde(const ProblemDocument& doc) const {
    RdeOptions o = doc.rde.value_or(RdeOptions{});
    if (conv_tol) o.conv_tol = *conv_tol;
    if (max_time) o.max_time = *max_time;
    return o;
  }
};

// Accepts "1,2,3", "1 2 3" or a mix, possibly spread over several arguments.
std::vector<double> parse_number_list(const std::vector<std::string>& parts, const std::string& flag) {
  std::vector<double> out;
  for (const std::string& part : parts) {
    std::string s = part;
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream in(s);
    std::string token;
    while (in >> token) {
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(token, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != token.size() || !std::isfinite(x)) {
        throw ParseError(flag + ": '" + token + "' is not a finite number");
      }
      out.push_back(x);
    }
  }
  return out;
}

struct AnalysisOutcome {
  int exit_code = kExitDone;
  std::string human;
  std::string machine;
  std::string error;
};

AnalysisOutcome analyze_file(const std::string& path, const NumericFlags& flags, bool bases) {
  AnalysisOutcome out;
  try {
    const ProblemDocument doc = read_problem_document(path);
    const Problem P = to_problem(doc, flags.tolerances(doc));
    const RdeOptions opts = flags.rde(doc);
    opts.validate();
    log_info("analyzing " + path);
    Report rep = analyze(P, opts);
    rep.name = doc.name.empty() ? fs::path(path).stem().string() : doc.name;
    log_debug(rep.name + ": riccati flow " + to_string(rep.condition_b.rde.status) + " after " +
              std::to_string(rep.condition_b.rde.accepted_steps) + " steps");
    const ReportDocument rd = make_report_document(rep, doc.x0, bases, &P);
    std::ostringstream human;
    print_report(human, rd);
    out.human = human.str();
    out.machine = emit_report_document(rd);
    bool undecided = rd.any_undecided();
    for (const CostEntry& e : rd.costs) undecided = undecided || e.status == "undecided";
    out.exit_code = undecided ? kExitUndecided : kExitDone;
  } catch (const Error& e) {
    out.exit_code = kExitInputError;
    out.error = e.what();
  }
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f << text;
}

int cmd_analyze(const std::string& file, const std::string& batch_dir, const std::string& out,
                const NumericFlags& flags, bool bases) {
  if (batch_dir.empty()) {
    if (file.empty()) {
      std::cerr << "error: analyze needs a problem file or --batch <dir>\n";
      return kExitInputError;
    }
    const AnalysisOutcome r = analyze_file(file, flags, bases);
    if (r.exit_code == kExitInputError) {
      std::cerr << "error: " << r.error << "\n";
      return r.exit_code;
    }
    std::cout << r.human;
    if (!out.empty()) write_file(out, r.machine);
    return r.exit_code;
  }

  std::vector<std::string> files;
  if (!fs::is_directory(batch_dir)) {
    std::cerr << "error: '" << batch_dir << "' is not a directory\n";
    return kExitInputError;
  }
  for (const auto& entry : fs::directory_iterator(batch_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (!out.empty()) fs::create_directories(out);

  const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<AnalysisOutcome> results(files.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, files.size()); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < files.size(); i = next++) results[i] = analyze_file(files[i], flags, bases);
    });
  }
  for (auto& t : pool) t.join();

  int code = kExitDone;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const AnalysisOutcome& r = results[i];
    if (r.exit_code == kExitInputError) {
      std::cerr << "error: " << r.error << "\n";
    } else {
      std::cout << r.human;
      if (!out.empty()) {
        write_file((fs::path(out) / (fs::path(files[i]).stem().string() + ".report.json")).string(), r.machine);
      }
    }
    if (r.exit_code == kExitInputError || code == kExitInputError) {
      code = kExitInputError;
    } else {
      code = std::max(code, r.exit_code);
    }
  }
  return code;
}

int cmd_simulate(const std::string& file, const std::vector<std::string>& x0_args, double T,
                 std::optional<double> dt, const std::vector<std::string>& gain_args, const std::string& out,
                 const NumericFlags& flags) {
  const ProblemDocument doc = read_problem_document(file);
  const Problem P = to_problem(doc, flags.tolerances(doc));
  const std::vector<double> x0v = parse_number_list(x0_args, "--x0");
  if (static_cast<Index>(x0v.size()) != P.n()) {
    throw ParseError("--x0: expected " + std::to_string(P.n()) + " entries, got " + std::to_string(x0v.size()));
  }
  const Vector x0 = Eigen::Map<const Vector>(x0v.data(), P.n());

  Synthesis syn;
  std::optional<double> expected;
  if (!gain_args.empty()) {
    const std::vector<double> k = parse_number_list(gain_args, "--gain");
    if (static_cast<Index>(k.size()) != P.m() * P.n()) {
      throw ParseError("--gain: expected " + std::to_string(P.m() * P.n()) + " entries (m x n, row-major), got " +
                       std::to_string(k.size()));
    }
    Matrix K(P.m(), P.n());
    for (Index i = 0; i < P.m(); ++i) {
      for (Index j = 0; j < P.n(); ++j) K(i, j) = k[static_cast<std::size_t>(i * P.n() + j)];
    }
    syn = synthesis_from_gain(P, K);
  } else {
    const RdeOptions opts = flags.rde(doc);
    const ConditionBResult b = check_condition_B(P, opts);
    if (b.verdict != Verdict::holds) {
      throw ValidationError(std::string("no regular optimal control certified: condition B ") + to_string(b.verdict) +
                            (b.note.empty() ? "" : " (" + b.note + ")") + "; pass --gain to simulate a fixed feedback");
    }
    syn = synthesize(P, *b.X_bar);
    expected = x0.dot(syn.X_bar * x0);
  }
  const double h = dt.value_or(std::min(0.01, T / 100.0));
  const Trajectory tr = simulate(P, syn, x0, {}, T, h);
  if (out.empty()) {
    write_trajectory(std::cout, tr, expected);
  } else {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw Error("cannot write '" + out + "'");
    write_trajectory(f, tr, expected);
  }
  return kExitDone;
}

int cmd_generate(std::uint64_t seed, Index n, Index m, const std::string& cls, Index count, bool stable,
                 const std::string& out_dir) {
  GenerateOptions opts;
  opts.seed = seed;
  opts.n = n;
  opts.m = m;
  opts.cls = parse_instance_class(cls);
  opts.stable = stable;
  const std::vector<ProblemDocument> docs = generate_instances(opts, count);
  if (docs.empty()) return kExitDone;
  fs::create_directories(out_dir);
  for (const ProblemDocument& d : docs) {
    write_file((fs::path(out_dir) / (d.name + ".json")).string(), emit_problem_document(d));
  }
  return kExitDone;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Existence and synthesis of regular optimal controls for singular LQ problems"};
  app.require_subcommand(1);

  NumericFlags flags;

  auto* analyze_cmd = app.add_subcommand("analyze", "decide the four equivalent conditions");
  std::string analyze_file_arg, batch_dir, analyze_out;
  bool bases = false;
  analyze_cmd->add_option("file", analyze_file_arg, "problem document");
  analyze_cmd->add_option("--out", analyze_out, "machine-readable report (directory with --batch)");
  analyze_cmd->add_flag("--bases", bases, "include orthonormal subspace bases");
  analyze_cmd->add_option("--batch", batch_dir, "analyze every .json file in a directory");
  flags.attach(analyze_cmd);

  auto* simulate_cmd = app.add_subcommand("simulate", "simulate the optimal (or a given) feedback");
  std::string simulate_file, simulate_out;
  std::vector<std::string> x0_args, gain_args;
  double T = 0.0;
  std::optional<double> dt;
  simulate_cmd->add_option("file", simulate_file, "problem document")->required();
  simulate_cmd->add_option("--x0", x0_args, "initial state, comma or space separated")->required();
  simulate_cmd->add_option("--T", T, "horizon")->required();
  simulate_cmd->add_option("--dt", dt, "output sampling step");
  simulate_cmd->add_option("--gain", gain_args, "feedback gain K (m x n, row-major)");
  simulate_cmd->add_option("--out", simulate_out, "trajectory file (default stdout)");
  flags.attach(simulate_cmd);

  auto* generate_cmd = app.add_subcommand("generate", "write random problem documents");
  std::uint64_t seed = 1;
  Index n = 2, m = 1, count = 1;
  std::string cls = "quadruple", out_dir = ".";
  bool stable = false;
  generate_cmd->add_option("--seed", seed, "generator seed")->required();
  generate_cmd->add_option("--n", n, "state dimension (1..12)")->required();
  generate_cmd->add_option("--m", m, "input dimension (1..6)")->required();
  generate_cmd->add_option("--class", cls, "quadruple, regular, cheap or hurwitz")->required();
  generate_cmd->add_option("--count", count, "number of documents")->required();
  generate_cmd->add_option("--out-dir", out_dir, "destination directory");
  generate_cmd->add_flag("--stable", stable, "shift A to be Hurwitz for any class");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitDone : kExitInputError;
  }

  try {
    if (*analyze_cmd) return cmd_analyze(analyze_file_arg, batch_dir, analyze_out, flags, bases);
    if (*simulate_cmd) {
      if (!(T > 0.0) || (dt && !(*dt > 0.0))) throw ValidationError("--T and --dt must be positive");
      return cmd_simulate(simulate_file, x0_args, T, dt, gain_args, simulate_out, flags);
    }
    if (*generate_cmd) return cmd_generate(seed, n, m, cls, count, stable, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}
