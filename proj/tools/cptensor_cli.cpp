// cptensor: command-line front end for CP membership, CP approximation,
// CP completion and copositivity certification.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cptensor/io.hpp"

namespace {

constexpr int kExitInput = 64;     // malformed or unusable input file
constexpr int kExitInternal = 70;  // unexpected library failure

struct Flags {
  std::string input;
  std::string out;
  std::uint64_t seed = 20231;
  int order_max = -1;
  int order = -1;
  double tol = -1.0;
  bool no_dehom = false;
  bool quiet = false;
  bool timings = false;
};

void emit(const nlohmann::json& report, const Flags& f) {
  const std::string text = report.dump(2) + "\n";
  if (f.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream os(f.out, std::ios::binary);
  if (!os) throw cptensor::FormatError("cannot write " + f.out);
  os << text;
}

void note(const Flags& f, const std::string& line) {
  if (!f.quiet) std::cerr << line << "\n";
}

int run_check_cp(const Flags& f) {
  const auto tf = cptensor::load_tensor_file(f.input);
  cptensor::MembershipOptions opt;
  opt.seed = f.seed;
  opt.order_max = f.order_max;
  opt.dehomogenize = !f.no_dehom;
  if (f.tol > 0) opt.tol = f.tol;
  const auto r = cptensor::check_cp(tf.tensor, opt);
  emit(cptensor::membership_report_json(r, {f.seed, f.timings}), f);
  note(f, std::string("check-cp: ") + cptensor::to_string(r.verdict) + " at order " + std::to_string(r.order));
  switch (r.verdict) {
    case cptensor::Verdict::CP: return 0;
    case cptensor::Verdict::NotCP: return 1;
    case cptensor::Verdict::Inconclusive: return 2;
  }
  return 2;
}

int conic_exit(cptensor::ConicStatus s) {
  switch (s) {
    case cptensor::ConicStatus::Optimal: return 0;
    case cptensor::ConicStatus::Infeasible:
    case cptensor::ConicStatus::Unbounded: return 1;
    case cptensor::ConicStatus::Inconclusive: return 2;
  }
  return 2;
}

int run_conic(const Flags& f, const std::string& command) {
  const auto tf = cptensor::load_tensor_file(f.input);
  cptensor::CpConicProblem p;
  if (command == "approx") {
    p = cptensor::build_approximation(tf.tensor);
  } else {
    if (!tf.unknown) throw cptensor::FormatError("completion input needs an \"unknown\" list");
    p = cptensor::build_completion(tf.tensor, *tf.unknown);
  }
  cptensor::ConicOptions opt;
  opt.seed = f.seed;
  opt.order_max = f.order_max;
  if (f.tol > 0) opt.tol = f.tol;
  const auto r = cptensor::solve_cp_conic(p, opt);
  emit(cptensor::conic_report_json(r, command, {f.seed, f.timings}), f);
  note(f, command + ": " + cptensor::to_string(r.status) + " at order " + std::to_string(r.order));
  return conic_exit(r.status);
}

int run_check_copositive(const Flags& f) {
  const auto tf = cptensor::load_tensor_file(f.input);
  const int k = f.order > 0 ? f.order : (tf.tensor.d() + 1) / 2 + 1;
  cptensor::CoposOptions opt;
  if (f.tol > 0) opt.tol_cop = f.tol;
  const auto r = cptensor::check_copositive(tf.tensor, k, opt);
  emit(cptensor::copositivity_report_json(r, {f.seed, f.timings}), f);
  note(f, std::string("check-copositive: ") + cptensor::to_string(r.verdict) + " with bound " +
              std::to_string(r.bound));
  if (r.verdict == cptensor::CoposVerdict::CertifiedCopositive) return 0;
  return r.status == cptensor::SolveStatus::Optimal ? 1 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Completely positive tensors: membership, approximation, completion, copositivity"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&f](CLI::App* sub) {
    sub->add_option("input", f.input, "tensor file (JSON)")->required();
    sub->add_option("--out", f.out, "write the report here instead of stdout");
    sub->add_option("--seed", f.seed, "seed of the generic objective")->capture_default_str();
    sub->add_option("--tol", f.tol, "acceptance tolerance");
    sub->add_flag("--quiet", f.quiet, "no diagnostics on stderr");
    sub->add_flag("--timings", f.timings, "include wall times in the report");
  };

  auto* cp = app.add_subcommand("check-cp", "decide membership in the CP cone");
  common(cp);
  cp->add_option("--order-max", f.order_max, "largest relaxation order");
  cp->add_flag("--no-dehom", f.no_dehom, "use the non-dehomogenized relaxation");

  auto* approx = app.add_subcommand("approx", "nearest CP tensor in the Hilbert-Schmidt norm");
  common(approx);
  approx->add_option("--order-max", f.order_max, "largest relaxation order");

  auto* complete = app.add_subcommand("complete", "CP completion minimizing the sum of unknown entries");
  common(complete);
  complete->add_option("--order-max", f.order_max, "largest relaxation order");

  auto* cop = app.add_subcommand("check-copositive", "lower bound of the form on the simplex");
  common(cop);
  cop->add_option("--order", f.order, "relaxation order (default ceil(d/2) + 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitInput;
  }

  try {
    if (cp->parsed()) return run_check_cp(f);
    if (approx->parsed()) return run_conic(f, "approx");
    if (complete->parsed()) return run_conic(f, "complete");
    if (cop->parsed()) return run_check_copositive(f);
  } catch (const cptensor::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const cptensor::StructuralError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const cptensor::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
