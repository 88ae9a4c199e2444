#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nodemr/mri/dataset.hpp"
#include "nodemr/train/config.hpp"
#include "nodemr/train/model.hpp"

namespace nodemr::train {

struct SampleMetrics {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricsReport {
  std::vector<SampleMetrics> samples;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::size_t parameter_count = 0;
  double seconds = 0.0;
  std::size_t peak_bytes = 0;  // activation bytes above the pre-run level
};

/// Scores each sample's reconstruction; `recons` is [N,2,H,W] aligned with `samples`.
MetricsReport score(std::span<const mri::Sample> samples, const Tensor& recons);

/// Reconstructs every sample with `model` in batches and scores the result.
/// Does not modify the model.
MetricsReport evaluate(const Model& model, std::span<const mri::Sample> samples, int batch_size = 4);

/// The zero-filled baseline E^H y scored the same way.
MetricsReport evaluate_zero_filled(std::span<const mri::Sample> samples);

/// CSV "id,psnr,ssim", one row per sample, then a MEAN row. Values use 17
/// significant digits; a perfect reconstruction's PSNR prints as "inf".
void write_report(const std::filesystem::path& path, const MetricsReport& report);

struct DatasetSplit {
  std::vector<mri::Sample> train;
  std::vector<mri::Sample> val;
};

/// The last `val_count` samples validate, the rest train.
DatasetSplit split_dataset(std::vector<mri::Sample> samples, int val_count);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_psnr = 0.0;
  double val_ssim = 0.0;
  double seconds = 0.0;
  std::size_t peak_bytes = 0;
};

struct TrainResult {
  std::vector<EpochMetrics> epochs;
  std::vector<double> batch_losses;  // in update order
  int best_epoch = 0;                // highest mean validation PSNR
  std::size_t parameter_count = 0;
  ParamSet best_archive;
  ParamSet final_archive;
};

/// Trains cfg.family on `samples` split by cfg.val_count. Batches are drawn
/// from a per-epoch shuffle seeded by cfg.seed; the model init has its own
/// derived seed. When `out_dir` is non-empty, metrics.csv, best.params and
/// final.params are written there. Progress lines go to `log` if given.
/// A non-finite loss or gradient raises NumericError naming epoch and batch.
TrainResult train_model(const std::vector<mri::Sample>& samples, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir = {}, std::ostream* log = nullptr);

}  // namespace nodemr::train
