#include "nodemr/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include "nodemr/mri/operators.hpp"
#include "nodemr/tensor/io.hpp"
#include "nodemr/tensor/random.hpp"
#include "nodemr/train/metrics.hpp"

namespace nodemr::train {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void finish_means(MetricsReport& r) {
  double p = 0.0, s = 0.0;
  for (const SampleMetrics& m : r.samples) {
    p += m.psnr;
    s += m.ssim;
  }
  const double n = double(std::max<std::size_t>(1, r.samples.size()));
  r.mean_psnr = p / n;
  r.mean_ssim = s / n;
}

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[std::size_t(rng.uniform_int(0, std::int64_t(i) - 1))]);
  return idx;
}

void check_dataset(std::span<const mri::Sample> samples, const char* what) {
  if (samples.empty()) throw ConfigError(std::string(what) + ": dataset is empty");
}

}  // namespace

MetricsReport score(std::span<const mri::Sample> samples, const Tensor& recons) {
  if (recons.rank() != 4 || recons.dim(0) != std::int64_t(samples.size())) {
    throw DimensionError("score: " + std::to_string(samples.size()) + " samples vs reconstructions " +
                         shape_string(recons.shape()));
  }
  MetricsReport r;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    mri::ComplexImage pred = mri::unstack(recons, std::int64_t(i));
    const mri::ComplexImage& truth = samples[i].image;
    if (pred.dtype() != truth.dtype()) pred = mri::ComplexImage(pred.planes.to(truth.dtype()));
    r.samples.push_back({samples[i].entry.id, psnr(pred, truth), ssim(pred, truth)});
  }
  finish_means(r);
  return r;
}

MetricsReport evaluate(const Model& model, std::span<const mri::Sample> samples, int batch_size) {
  check_dataset(samples, "evaluate");
  if (batch_size < 1) throw ConfigError("evaluate: batch_size must be at least 1");
  const auto t0 = Clock::now();
  reset_activation_peak();
  const std::size_t base = activation_stats().live;
  MetricsReport r;
  for (std::size_t start = 0; start < samples.size(); start += std::size_t(batch_size)) {
    const std::size_t n = std::min<std::size_t>(std::size_t(batch_size), samples.size() - start);
    const auto chunk = samples.subspan(start, n);
    const MetricsReport part = score(chunk, model.reconstruct(make_batch(chunk)));
    r.samples.insert(r.samples.end(), part.samples.begin(), part.samples.end());
  }
  finish_means(r);
  r.parameter_count = model.parameter_count();
  r.peak_bytes = activation_stats().peak - base;
  r.seconds = seconds_since(t0);
  return r;
}

MetricsReport evaluate_zero_filled(std::span<const mri::Sample> samples) {
  check_dataset(samples, "evaluate_zero_filled");
  const auto t0 = Clock::now();
  MetricsReport r;
  for (const mri::Sample& s : samples) {
    const mri::ComplexImage zf = mri::zero_filled(s.kspace, s.mask);
    r.samples.push_back({s.entry.id, psnr(zf, s.image), ssim(zf, s.image)});
  }
  finish_means(r);
  r.seconds = seconds_since(t0);
  return r;
}

void write_report(const std::filesystem::path& path, const MetricsReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open report for writing");
  out << "id,psnr,ssim\n";
  for (const SampleMetrics& m : report.samples) out << m.id << "," << num(m.psnr) << "," << num(m.ssim) << "\n";
  out << "MEAN," << num(report.mean_psnr) << "," << num(report.mean_ssim) << "\n";
  if (!out) throw IoError(path.string() + ": write failed");
}

DatasetSplit split_dataset(std::vector<mri::Sample> samples, int val_count) {
  if (val_count < 1 || std::size_t(val_count) >= samples.size()) {
    throw ConfigError("val_count " + std::to_string(val_count) + " leaves no training samples out of " +
                      std::to_string(samples.size()));
  }
  DatasetSplit s;
  const std::size_t n_train = samples.size() - std::size_t(val_count);
  s.val.assign(std::make_move_iterator(samples.begin() + std::ptrdiff_t(n_train)), std::make_move_iterator(samples.end()));
  samples.resize(n_train);
  s.train = std::move(samples);
  return s;
}

TrainResult train_model(const std::vector<mri::Sample>& samples, const TrainConfig& cfg, const std::filesystem::path& out_dir,
                  std::ostream* log) {
  cfg.validate();
  const DatasetSplit split = split_dataset(samples, cfg.val_count);
  Model model = Model::init(cfg.family, cfg.model_options(), derive_seed(cfg.seed, "model"));
  Optimizer opt(model.params(), cfg.optimizer_config());

  std::ofstream metrics;
  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError(out_dir.string() + ": cannot create output directory: " + ec.message());
    metrics.open(out_dir / "metrics.csv", std::ios::binary);
    if (!metrics) throw IoError((out_dir / "metrics.csv").string() + ": cannot open for writing");
    metrics << "epoch,train_loss,val_psnr,val_ssim,seconds,peak_bytes\n" << std::flush;
  }

  TrainResult result;
  result.parameter_count = model.parameter_count();
  double best_psnr = -std::numeric_limits<double>::infinity();
  const std::size_t bs = std::size_t(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = Clock::now();
    const std::vector<std::size_t> order = shuffled(split.train.size(), derive_seed(cfg.seed, "shuffle", std::uint64_t(epoch)));
    double loss_sum = 0.0;
    std::size_t seen = 0, peak = 0;
    for (std::size_t start = 0, b = 1; start < order.size(); start += bs, ++b) {
      const std::size_t n = std::min(bs, order.size() - start);
      const Batch batch = make_batch(split.train, std::span(order).subspan(start, n));
      const std::string where = "epoch " + std::to_string(epoch) + " batch " + std::to_string(b);
      reset_activation_peak();
      const std::size_t base = activation_stats().live;
      LossGrad lg;
      try {
        lg = model.loss_and_grad(batch);
        if (!std::isfinite(lg.loss)) throw NumericError("training loss is " + num(lg.loss));
        opt.step(model.params(), lg.grads);
      } catch (const NumericError& e) {
        throw NumericError(where + ": " + e.what());
      }
      peak = std::max(peak, activation_stats().peak - base);
      loss_sum += lg.loss * double(n);
      seen += n;
      result.batch_losses.push_back(lg.loss);
    }
    const MetricsReport val = evaluate(model, split.val, cfg.batch_size);
    EpochMetrics em{epoch, loss_sum / double(seen), val.mean_psnr, val.mean_ssim, seconds_since(t0), peak};
    result.epochs.push_back(em);
    if (metrics.is_open()) {
      char secs[32];
      std::snprintf(secs, sizeof secs, "%.3f", em.seconds);
      metrics << epoch << "," << num(em.train_loss) << "," << num(em.val_psnr) << "," << num(em.val_ssim) << ","
              << secs << "," << em.peak_bytes << "\n" << std::flush;
    }
    if (log) {
      char line[256];
      std::snprintf(line, sizeof line,
                    "epoch %d/%d  train_loss %.6f  val_psnr %.3f dB  val_ssim %.4f  %.1f s  peak %zu bytes\n", epoch,
                    cfg.epochs, em.train_loss, em.val_psnr, em.val_ssim, em.seconds, em.peak_bytes);
      *log << line << std::flush;
    }
    if (em.val_psnr > best_psnr) {
      best_psnr = em.val_psnr;
      result.best_epoch = epoch;
      result.best_archive = model.to_archive();
      if (!out_dir.empty()) save_archive(out_dir / "best.params", result.best_archive);
    }
  }
  result.final_archive = model.to_archive();
  if (!out_dir.empty()) save_archive(out_dir / "final.params", result.final_archive);
  return result;
}

}  // namespace nodemr::train
