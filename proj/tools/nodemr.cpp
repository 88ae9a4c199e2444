// Command-line entry point. Exit codes: 0 success, 1 configuration error,
// 2 numeric failure, 3 I/O error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nodemr/error.hpp"
#include "nodemr/mri/dataset.hpp"
#include "nodemr/mri/operators.hpp"
#include "nodemr/solvers/bench.hpp"
#include "nodemr/tensor/io.hpp"
#include "nodemr/tensor/random.hpp"
#include "nodemr/train/check.hpp"
#include "nodemr/train/metrics.hpp"
#include "nodemr/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace nodemr;

namespace {

enum Exit { kOk = 0, kConfig = 1, kNumeric = 2, kIo = 3 };

constexpr double kGradTolerance = 1e-3;
constexpr double kGapTolerance = 5e-2;

void echo(const std::string& command, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::cout << "[" << command << "]\n";
  for (const auto& [k, v] : kv) std::cout << k << " = " << v << "\n";
  std::cout << std::flush;
}

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// ---- gen-data ----

struct GenArgs {
  std::string out;
  mri::GenerateOptions opts;
};

int run_gen_data(const GenArgs& a) {
  echo("gen-data", {{"out", a.out},
                    {"count", std::to_string(a.opts.count)},
                    {"size", std::to_string(a.opts.size)},
                    {"af", std::to_string(a.opts.af)},
                    {"noise", fmt(a.opts.noise_std, "%.17g")},
                    {"seed", std::to_string(a.opts.seed)}});
  mri::generate_dataset(a.out, a.opts);
  std::cout << "wrote " << a.opts.count << " samples to " << a.out << "\n";
  return kOk;
}

// ---- train ----

struct TrainArgs {
  std::string data, config, out;
};

int run_train(const TrainArgs& a) {
  const train::TrainConfig cfg = train::load_train_config(a.config);
  echo("train", {{"data", a.data}, {"config", a.config}, {"out", a.out}});
  std::cout << train::format_train_config(cfg) << std::flush;
  const std::vector<mri::Sample> samples = mri::load_dataset(a.data);
  const train::TrainResult r = train::train_model(samples, cfg, a.out, &std::cout);
  const train::EpochMetrics& best = r.epochs[std::size_t(r.best_epoch - 1)];
  std::cout << "parameters " << r.parameter_count << "\n"
            << "best epoch " << r.best_epoch << " val_psnr " << fmt(best.val_psnr, "%.3f") << " dB val_ssim "
            << fmt(best.val_ssim, "%.4f") << "\n";
  return kOk;
}

// ---- reconstruct ----

struct ReconArgs {
  std::string input, mask, model, out, truth;
};

int run_reconstruct(const ReconArgs& a) {
  echo("reconstruct", {{"input", a.input}, {"mask", a.mask}, {"model", a.model}, {"out", a.out},
                       {"truth", a.truth.empty() ? "(none)" : a.truth}});
  const train::Model model = train::Model::from_archive(load_archive(a.model));
  const DType dtype = model.params()[0].tensor.dtype();

  mri::Sample s;
  s.entry.id = fs::path(a.input).stem().string();
  s.kspace = mri::KSpace(load_tensor(a.input).to(dtype));
  s.mask = mri::Mask::from_tensor(load_tensor(a.mask));
  if (s.kspace.planes.rank() != 3 || s.kspace.planes.dim(0) != 2) {
    throw DimensionError("k-space must be [2,H,W], got " + shape_string(s.kspace.planes.shape()));
  }
  if (s.mask.width() != s.kspace.width()) {
    throw DimensionError("mask width " + std::to_string(s.mask.width()) + " vs k-space width " +
                         std::to_string(s.kspace.width()));
  }
  const bool scored = !a.truth.empty();
  s.image = scored ? mri::ComplexImage(load_tensor(a.truth).to(dtype))
                   : mri::ComplexImage::zeros(s.kspace.height(), s.kspace.width(), dtype);
  if (s.image.planes.shape() != s.kspace.planes.shape()) {
    throw DimensionError("truth " + shape_string(s.image.planes.shape()) + " vs k-space " +
                         shape_string(s.kspace.planes.shape()));
  }

  const Tensor recon = model.reconstruct(train::make_batch(std::span(&s, 1)));
  const mri::ComplexImage img = mri::unstack(recon, 0);
  save_tensor(a.out, img.planes);
  std::cout << "wrote " << shape_string(img.planes.shape()) << " reconstruction to " << a.out << "\n";
  if (scored) {
    const mri::ComplexImage zf = mri::zero_filled(s.kspace, s.mask);
    std::cout << "psnr " << fmt(train::psnr(img, s.image), "%.4f") << " dB  ssim "
              << fmt(train::ssim(img, s.image), "%.5f") << "\n"
              << "zero-filled psnr " << fmt(train::psnr(zf, s.image), "%.4f") << " dB  ssim "
              << fmt(train::ssim(zf, s.image), "%.5f") << "\n";
  }
  return kOk;
}

// ---- eval ----

struct EvalArgs {
  std::string data, model, out;
  int val_count = 0;
  int batch_size = 4;
};

int run_eval(const EvalArgs& a) {
  echo("eval", {{"data", a.data},
                {"model", a.model.empty() ? "(zero-filled baseline)" : a.model},
                {"out", a.out},
                {"val_count", a.val_count > 0 ? std::to_string(a.val_count) : "all"},
                {"batch_size", std::to_string(a.batch_size)}});
  std::vector<mri::Sample> samples = mri::load_dataset(a.data);
  if (a.val_count > 0) samples = train::split_dataset(std::move(samples), a.val_count).val;
  train::MetricsReport report;
  if (a.model.empty()) {
    report = train::evaluate_zero_filled(samples);
  } else {
    const train::Model model = train::Model::from_archive(load_archive(a.model));
    const DType dtype = model.params()[0].tensor.dtype();
    for (mri::Sample& s : samples) {
      s.image = mri::ComplexImage(s.image.planes.to(dtype));
      s.kspace = mri::KSpace(s.kspace.planes.to(dtype));
    }
    report = train::evaluate(model, samples, a.batch_size);
  }
  if (!a.out.empty()) train::write_report(a.out, report);
  std::cout << "samples " << report.samples.size() << "\n"
            << "mean psnr " << fmt(report.mean_psnr, "%.4f") << " dB\n"
            << "mean ssim " << fmt(report.mean_ssim, "%.5f") << "\n";
  return kOk;
}

// ---- solver-bench ----

struct BenchArgs {
  std::string ode = "exp_decay";
  std::vector<int> steps{4, 8, 16, 32, 64};
};

void print_rows(const std::vector<solvers::BenchRow>& rows) {
  std::printf("%-10s %-6s %8s %14s %10s\n", "ode", "tableau", "n_steps", "error", "ratio");
  for (const solvers::BenchRow& r : rows) {
    std::printf("%-10s %-6s %8d %14.6e %10s\n", std::string(solvers::to_string(r.ode)).c_str(),
                std::string(solvers::to_string(r.kind)).c_str(), r.n_steps, r.error,
                std::isnan(r.halving_ratio) ? "-" : fmt(r.halving_ratio, "%.4f").c_str());
  }
}

int run_solver_bench(const BenchArgs& a) {
  std::string steps;
  for (int n : a.steps) steps += (steps.empty() ? "" : ",") + std::to_string(n);
  echo("solver-bench", {{"ode", a.ode}, {"steps", steps}});
  const solvers::BenchOde ode = solvers::parse_bench_ode(a.ode);
  const std::vector<solvers::BenchRow> rows = solvers::solver_bench(ode, a.steps);
  std::vector<solvers::BenchRow> zero = solvers::solver_bench(solvers::BenchOde::zero, a.steps);
  print_rows(rows);
  if (ode != solvers::BenchOde::zero) {
    std::printf("\n");
    print_rows(zero);
  }
  for (solvers::TableauKind k : {solvers::TableauKind::euler, solvers::TableauKind::rk2, solvers::TableauKind::rk4}) {
    const solvers::RatioBand b = solvers::halving_band(k);
    std::printf("band %-6s [%g, %g]\n", std::string(solvers::to_string(k)).c_str(), b.lo, b.hi);
  }
  bool ok = ode == solvers::BenchOde::zero || solvers::within_bands(rows);
  for (const solvers::BenchRow& r : zero) ok = ok && r.error == 0.0;
  std::cout << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? kOk : kNumeric;
}

// ---- gradcheck ----

struct GradArgs {
  std::string family;
  std::int64_t size = 8;
  std::uint64_t seed = 0;
};

int run_gradcheck(const GradArgs& a) {
  echo("gradcheck", {{"family", a.family}, {"size", std::to_string(a.size)}, {"seed", std::to_string(a.seed)}});
  const train::Family family = train::parse_family(a.family);
  if (a.size < 4 || a.size > 16) throw ConfigError("--size must be in [4, 16], got " + std::to_string(a.size));

  // fa shares its parameters with ft; the oracle checks the ft gradients.
  train::Family checked = family;
  if (checked.method == train::Method::fa) checked.method = train::Method::ft;
  train::ModelOptions o;
  o.width = 8;
  o.n_steps = 4;
  o.cascades = 2;
  const train::CheckProblem problem = train::make_check_problem(a.size, a.seed);
  train::Model model = train::Model::init(checked, o, derive_seed(a.seed, "gradcheck"), DType::f64);
  train::perturb_parameters(model, a.seed, 0.05);
  const train::FamilyGradCheck g = train::check_gradients(model, problem, a.seed);
  bool ok = g.max_relative_error < kGradTolerance;
  std::cout << checked.name() << " finite-difference: " << g.coordinates << " coordinates, max relative error "
            << fmt(g.max_relative_error, "%.3e") << " at " << g.worst << " (tolerance " << kGradTolerance << ") "
            << (ok ? "ok" : "BREACH") << "\n";

  if (family.method == train::Method::lt) {
    std::cout << "adjoint agreement: not applicable to learned solvers\n";
  } else {
    const int steps[] = {5, 10, 20};
    const std::vector<train::AdjointGap> gaps = train::adjoint_gaps(family.tableau, steps, problem, a.seed);
    bool decreasing = true;
    double at10 = 0.0;
    for (std::size_t i = 0; i < gaps.size(); ++i) {
      std::cout << "fa vs ft gap n=" << gaps[i].n_steps << ": " << fmt(gaps[i].gap, "%.3e") << "\n";
      if (i > 0 && !(gaps[i].gap < gaps[i - 1].gap)) decreasing = false;
      if (gaps[i].n_steps == 10) at10 = gaps[i].gap;
    }
    const bool gap_ok = decreasing && at10 < kGapTolerance;
    std::cout << "adjoint agreement: " << (decreasing ? "decreasing" : "NOT decreasing") << ", n=10 gap "
              << (at10 < kGapTolerance ? "below " : "above ") << kGapTolerance << " " << (gap_ok ? "ok" : "BREACH")
              << "\n";
    ok = ok && gap_ok;
  }
  std::cout << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? kOk : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural-ODE reconstruction of undersampled MRI-style images"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic phantom dataset");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--count", gen.opts.count, "Number of samples")->check(CLI::PositiveNumber);
  g->add_option("--size", gen.opts.size, "Image height and width")->check(CLI::Range(32, 1024));
  g->add_option("--af", gen.opts.af, "Acceleration factor")->check(CLI::IsMember({4, 8}));
  g->add_option("--noise", gen.opts.noise_std, "k-space noise standard deviation")->check(CLI::NonNegativeNumber);
  g->add_option("--seed", gen.opts.seed, "Dataset seed");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model from a config file");
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--config", tr.config, "Config file of key = value lines")->required();
  t->add_option("--out", tr.out, "Output directory for archives and metrics.csv")->required();

  ReconArgs rc;
  auto* r = app.add_subcommand("reconstruct", "Reconstruct one k-space file");
  r->add_option("--input", rc.input, "k-space tensor [2,H,W]")->required();
  r->add_option("--mask", rc.mask, "Column mask tensor [W]")->required();
  r->add_option("--model", rc.model, "Parameter archive")->required();
  r->add_option("--out", rc.out, "Output image tensor [2,H,W]")->required();
  r->add_option("--truth", rc.truth, "Ground-truth image for PSNR/SSIM");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a model (or the zero-filled baseline) on a dataset");
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--model", ev.model, "Parameter archive; omit to score zero-filled reconstructions");
  e->add_option("--out", ev.out, "Report CSV (id,psnr,ssim plus MEAN)");
  e->add_option("--val-count", ev.val_count, "Score only the last N samples (the validation split)")
      ->check(CLI::NonNegativeNumber);
  e->add_option("--batch-size", ev.batch_size, "Reconstruction batch size")->check(CLI::PositiveNumber);

  BenchArgs bn;
  auto* b = app.add_subcommand("solver-bench", "Global error and convergence of the fixed tableaux");
  b->add_option("--ode", bn.ode, "Test problem: exp_decay or zero");
  b->add_option("--steps", bn.steps, "Increasing step counts, comma separated")->delimiter(',');

  GradArgs gc;
  auto* c = app.add_subcommand("gradcheck", "Finite-difference and adjoint gradient checks");
  c->add_option("--family", gc.family, "Model family, e.g. ft_rk2")->required();
  c->add_option("--size", gc.size, "Image size (at most 16)");
  c->add_option("--seed", gc.seed, "Problem seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kConfig;
  }

  try {
    if (*g) return run_gen_data(gen);
    if (*t) return run_train(tr);
    if (*r) return run_reconstruct(rc);
    if (*e) return run_eval(ev);
    if (*b) return run_solver_bench(bn);
    if (*c) return run_gradcheck(gc);
  } catch (const IoError& ex) {
    std::cerr << "I/O error: " << ex.what() << "\n";
    return kIo;
  } catch (const NumericError& ex) {
    std::cerr << "numeric failure: " << ex.what() << "\n";
    return kNumeric;
  } catch (const DimensionError& ex) {
    std::cerr << "dimension error: " << ex.what() << "\n";
    return kConfig;
  } catch (const Error& ex) {
    std::cerr << "configuration error: " << ex.what() << "\n";
    return kConfig;
  } catch (const std::filesystem::filesystem_error& ex) {
    std::cerr << "I/O error: " << ex.what() << "\n";
    return kIo;
  }
  return kConfig;
}
