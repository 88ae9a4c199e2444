#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nodemr/mri/operators.hpp"
#include "nodemr/tensor/gradcheck.hpp"
#include "nodemr/tensor/io.hpp"
#include "nodemr/tensor/ops.hpp"
#include "nodemr/tensor/random.hpp"
#include "nodemr/train/check.hpp"
#include "nodemr/train/metrics.hpp"
#include "nodemr/train/trainer.hpp"

using namespace nodemr;
using namespace nodemr::train;

namespace {

mri::ComplexImage image_from(const Tensor& re, const Tensor& im) {
  const std::int64_t h = re.dim(0), w = re.dim(1);
  Tensor planes({2, h, w}, re.dtype());
  for (std::int64_t i = 0; i < h * w; ++i) {
    planes.set(i, re.at(i));
    planes.set(h * w + i, im.at(i));
  }
  return mri::ComplexImage(planes);
}

mri::ComplexImage random_image(std::int64_t n, std::uint64_t seed, DType dtype = DType::f64) {
  return mri::ComplexImage(Rng(seed).uniform_tensor({2, n, n}, -1, 1, dtype));
}

// Direct per-window evaluation of the SSIM definition.
double naive_ssim(const Tensor& a, const Tensor& b, double range) {
  const std::int64_t h = a.dim(0), w = a.dim(1), k = 7;
  const double c1 = std::pow(0.01 * range, 2), c2 = std::pow(0.03 * range, 2), np = 49.0;
  double total = 0;
  int count = 0;
  for (std::int64_t y = 0; y + k <= h; ++y)
    for (std::int64_t x = 0; x + k <= w; ++x) {
      double ma = 0, mb = 0;
      for (std::int64_t i = 0; i < k; ++i)
        for (std::int64_t j = 0; j < k; ++j) {
          ma += a.at((y + i) * w + x + j);
          mb += b.at((y + i) * w + x + j);
        }
      ma /= np;
      mb /= np;
      double va = 0, vb = 0, cab = 0;
      for (std::int64_t i = 0; i < k; ++i)
        for (std::int64_t j = 0; j < k; ++j) {
          const double da = a.at((y + i) * w + x + j) - ma, db = b.at((y + i) * w + x + j) - mb;
          va += da * da;
          vb += db * db;
          cab += da * db;
        }
      va /= np - 1;
      vb /= np - 1;
      cab /= np - 1;
      total += (2 * ma * mb + c1) * (2 * cab + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / count;
}

std::vector<mri::Sample> tiny_dataset(int count, std::uint64_t seed = 3) {
  mri::GenerateOptions o;
  o.count = count;
  o.size = 32;
  o.seed = seed;
  std::vector<mri::Sample> out;
  for (int i = 0; i < count; ++i) out.push_back(mri::synthesize_sample(o, i));
  return out;
}

TrainConfig tiny_config(const char* family) {
  TrainConfig c;
  c.family = parse_family(family);
  c.epochs = 1;
  c.batch_size = 2;
  c.width = 4;
  c.n_steps = 2;
  c.cascades = 2;
  c.val_count = 2;
  c.seed = 11;
  return c;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("nodemr_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("psnr examples") {
    const Tensor one = Tensor::full({8, 8}, 1.0, DType::f64), zero({8, 8}, DType::f64);
    const mri::ComplexImage truth = image_from(one, zero);
    CHECK(psnr(truth, truth) == kPsnrIdentical);
    CHECK(std::isinf(psnr(truth, truth)));
    const mri::ComplexImage pred = image_from(Tensor::full({8, 8}, 1.1, DType::f64), zero);
    CHECK(std::abs(psnr(pred, truth) - 20.0) < 1e-9);
    const mri::ComplexImage a = random_image(16, 1), b = random_image(16, 2);
    Tensor as = a.planes.clone(), bs = b.planes.clone();
    for (std::int64_t i = 0; i < as.numel(); ++i) {
      as.set(i, 3.7 * as.at(i));
      bs.set(i, 3.7 * bs.at(i));
    }
    CHECK(std::abs(psnr(mri::ComplexImage(as), mri::ComplexImage(bs)) - psnr(a, b)) < 1e-6);
    CHECK_THROWS_AS(psnr(truth, image_from(zero, zero)), ContractError);
  }

  TEST_CASE("ssim examples and window oracle") {
    const mri::ComplexImage a = random_image(12, 3), b = random_image(12, 4);
    CHECK(std::abs(ssim(a, a) - 1.0) < 1e-6);
    const Tensor ma = magnitude(a.planes), mb = magnitude(b.planes);
    CHECK(ssim_real(ma, mb, 1.3) == doctest::Approx(ssim_real(mb, ma, 1.3)).epsilon(1e-14));
    double range = 0;
    for (std::int64_t i = 0; i < mb.numel(); ++i) range = std::max(range, mb.at(i));
    CHECK(std::abs(ssim(a, b) - naive_ssim(ma, mb, range)) < 1e-12);

    const double c1 = 1e-4, c2 = 9e-4;
    const double oracle = (2 * 0.5 * 0.6 + c1) * c2 / ((0.25 + 0.36 + c1) * c2);
    CHECK(std::abs(ssim_real(Tensor::full({9, 9}, 0.5, DType::f64), Tensor::full({9, 9}, 0.6, DType::f64), 1.0) - oracle) <
          1e-12);
    CHECK_THROWS_AS(ssim(random_image(6, 1), random_image(6, 2)), ContractError);
  }

  TEST_CASE("recon_loss zero at truth, non-negative, positive off truth") {
    Tape tape;
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Tensor truth = Rng(s).uniform_tensor({2, 2, 16, 16}, -1, 1);
      CHECK(std::abs(recon_loss(tape.constant(truth), truth).value().item()) < 1e-6);
      const Tensor pred = Rng(100 + s).uniform_tensor({2, 2, 16, 16}, -1, 1);
      CHECK(recon_loss(tape.constant(pred), truth).value().item() > 0.0);
    }
    // Same magnitudes, different phase: loss 0.
    const Tensor t = Rng(9).uniform_tensor({1, 2, 8, 8}, -1, 1);
    Tensor flipped = t.clone();
    for (std::int64_t i = 0; i < 64; ++i) flipped.set(i, -t.at(i));
    CHECK(std::abs(recon_loss(tape.constant(flipped), t).value().item()) < 1e-6);
  }

  TEST_CASE("recon_loss gradient matches finite differences on 16x16") {
    const Tensor truth = Rng(5).uniform_tensor({2, 2, 16, 16}, -1, 1, DType::f64);
    const Tensor pred = Rng(6).uniform_tensor({2, 2, 16, 16}, -1, 1, DType::f64);
    Tape tape;
    const Var p = tape.leaf(pred);
    tape.backward(recon_loss(p, truth));
    const Tensor numeric = finite_diff_grad([&](const Tensor& probe) {
      Tape t;
      return recon_loss(t.constant(probe), truth).value().item();
    }, pred, 1e-6);
    const GradComparison c = compare_gradients(tape.grad(p), numeric, 1e-7);
    CHECK(c.checked > 1000);
    CHECK(c.max_relative_error < 1e-3);
  }

  TEST_CASE("ssim term gradient alone") {
    const Tensor truth = Rng(7).uniform_tensor({1, 2, 10, 10}, -1, 1, DType::f64);
    const Tensor pred = Rng(8).uniform_tensor({1, 2, 10, 10}, -1, 1, DType::f64);
    Tape tape;
    const Var p = tape.leaf(pred);
    tape.backward(ssim_magnitude(p, truth));
    const Tensor numeric = finite_diff_grad([&](const Tensor& probe) {
      Tape t;
      return ssim_magnitude(t.constant(probe), truth).value().item();
    }, pred, 1e-6);
    CHECK(compare_gradients(tape.grad(p), numeric, 1e-8).max_relative_error < 1e-4);
  }
}

TEST_SUITE("optimizer") {
  ParamSet scalar_param(double w) {
    ParamSet p;
    p.add("w", Tensor::full({1}, w, DType::f64));
    return p;
  }

  TEST_CASE("zero gradient leaves parameters unchanged") {
    for (OptimizerKind kind : {OptimizerKind::adam, OptimizerKind::radam})
      for (bool la : {false, true}) {
        ParamSet p;
        p.add("a", Rng(1).uniform_tensor({3, 4}, -1, 1));
        const Tensor before = p[0].tensor.clone();
        OptimizerConfig cfg;
        cfg.kind = kind;
        cfg.lookahead = la;
        cfg.lookahead_k = 1;
        Optimizer opt(p, cfg);
        const Tensor g({3, 4});
        opt.step(p, std::span(&g, 1));
        CHECK(bit_equal(p[0].tensor, before));
      }
  }

  TEST_CASE("Adam minimizes w^2") {
    ParamSet p = scalar_param(1.0);
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::adam;
    cfg.learning_rate = 0.1;
    cfg.lookahead = false;
    Optimizer opt(p, cfg);
    for (int i = 0; i < 200; ++i) {
      const Tensor g = Tensor::full({1}, 2.0 * p[0].tensor.item(), DType::f64);
      opt.step(p, std::span(&g, 1));
    }
    MESSAGE("|w| after 200 Adam steps: " << std::abs(p[0].tensor.item()));
    CHECK(std::abs(p[0].tensor.item()) < 0.05);
  }

  TEST_CASE("first steps: Adam moves by lr, RAdam falls back to momentum SGD") {
    OptimizerConfig cfg;
    cfg.lookahead = false;
    cfg.learning_rate = 0.01;
    const Tensor g = Tensor::full({1}, 0.3, DType::f64);
    cfg.kind = OptimizerKind::adam;
    ParamSet a = scalar_param(1.0);
    Optimizer(a, cfg).step(a, std::span(&g, 1));
    CHECK(std::abs(a[0].tensor.item() - (1.0 - 0.01 * 0.3 / (0.3 + 1e-8))) < 1e-15);
    cfg.kind = OptimizerKind::radam;
    ParamSet r = scalar_param(1.0);
    Optimizer(r, cfg).step(r, std::span(&g, 1));
    CHECK(std::abs(r[0].tensor.item() - (1.0 - 0.01 * 0.3)) < 1e-15);
  }

  TEST_CASE("lookahead with alpha = 1 reproduces the inner optimizer") {
    for (OptimizerKind kind : {OptimizerKind::adam, OptimizerKind::radam}) {
      ParamSet plain, la;
      plain.add("a", Rng(2).uniform_tensor({5}, -1, 1));
      la = plain;
      OptimizerConfig c1;
      c1.kind = kind;
      c1.lookahead = false;
      OptimizerConfig c2 = c1;
      c2.lookahead = true;
      c2.lookahead_alpha = 1.0;
      c2.lookahead_k = 3;
      Optimizer o1(plain, c1), o2(la, c2);
      Rng rng(3);
      for (int i = 0; i < 23; ++i) {
        const Tensor g = rng.uniform_tensor({5}, -1, 1);
        o1.step(plain, std::span(&g, 1));
        o2.step(la, std::span(&g, 1));
        CHECK(bit_equal(plain[0].tensor, la[0].tensor));
      }
    }
  }

  TEST_CASE("lookahead pulls toward slow weights every k steps") {
    ParamSet p = scalar_param(0.0);
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::adam;
    cfg.learning_rate = 0.1;
    cfg.lookahead_k = 2;
    cfg.lookahead_alpha = 0.5;
    Optimizer opt(p, cfg);
    const Tensor g = Tensor::full({1}, -1.0, DType::f64);
    const double step = 0.1 / (1.0 + cfg.epsilon);  // m_hat = -1, v_hat = 1
    opt.step(p, std::span(&g, 1));
    CHECK(std::abs(p[0].tensor.item() - step) < 1e-15);
    opt.step(p, std::span(&g, 1));
    CHECK(std::abs(p[0].tensor.item() - step) < 1e-15);  // fast 2 step, slow 0 -> step
  }

  TEST_CASE("non-finite gradient names the parameter and changes nothing") {
    ParamSet p;
    p.add("good", Tensor::full({2}, 1.0));
    p.add("dyn.layer3.bias", Tensor::full({2}, 1.0));
    Optimizer opt(p, {});
    const Tensor grads[] = {Tensor::full({2}, 0.5), Tensor({2}, std::vector<float>{0.0f, NAN})};
    try {
      opt.step(p, grads);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("dyn.layer3.bias") != std::string::npos);
    }
    CHECK(p[0].tensor.at(0) == 1.0);
    CHECK(opt.steps() == 0);
  }
}

TEST_SUITE("config") {
  TEST_CASE("parse, defaults and round trip") {
    const TrainConfig c = parse_train_config(
        "# LT run\nfamily = lt_rk4\nepochs=3\n  learning_rate = 2e-4  # inline\nlookahead = false\ncheckpoint = true\n"
        "dc_mode = final\nseed = 18446744073709551615\n");
    CHECK(c.family.name() == "lt_rk4");
    CHECK(c.epochs == 3);
    CHECK(c.learning_rate == 2e-4);
    CHECK_FALSE(c.lookahead);
    CHECK(c.checkpointing);
    CHECK_FALSE(c.dc_every_step);
    CHECK(c.seed == 18446744073709551615ull);
    CHECK(c.batch_size == 4);
    CHECK(c.optimizer == OptimizerKind::radam);
    const TrainConfig back = parse_train_config(format_train_config(c));
    CHECK(format_train_config(back) == format_train_config(c));
  }

  TEST_CASE("errors carry line numbers") {
    auto message = [](const char* text) {
      try {
        parse_train_config(text, "run.cfg");
      } catch (const ConfigError& e) {
        return std::string(e.what());
      }
      return std::string("no error");
    };
    CHECK(message("epochs = 2\nbogus = 1\n").find("run.cfg:2:") == 0);
    CHECK(message("epochs = 2\n\nepochs = 3\n").find("run.cfg:3:") == 0);
    CHECK(message("epochs = two\n").find("run.cfg:1:") == 0);
    CHECK(message("just words\n").find("run.cfg:1:") == 0);
    const std::string fam = message("family = ft_rk3\n");
    CHECK(fam.find("run.cfg:1:") == 0);
    for (const Family& f : all_families()) CHECK(fam.find(f.name()) != std::string::npos);
    CHECK(message("learning_rate = 0\n").find("learning_rate") != std::string::npos);
    CHECK(message("epochs = 0\n").find("epochs") != std::string::npos);
    CHECK(message("dc_mode = sometimes\n").find("run.cfg:1:") == 0);
    CHECK(message("optimizer = sgd\n").find("adam, radam") != std::string::npos);
  }
}

TEST_SUITE("model") {
  TEST_CASE("family names") {
    CHECK(all_families().size() == 9);
    for (const Family& f : all_families()) CHECK(parse_family(f.name()) == f);
    CHECK_THROWS_AS(parse_family("lt_rk3"), ConfigError);
  }

  TEST_CASE("parameter counts") {
    for (auto k : {solvers::TableauKind::euler, solvers::TableauKind::rk2, solvers::TableauKind::rk4}) {
      CHECK(Model::init({Method::ft, k}, {}, 1).parameter_count() ==
            Model::init({Method::fa, k}, {}, 2).parameter_count());
    }
    CHECK(Model::init(parse_family("ft_euler"), {}, 0).parameter_count() == 30686);
    const double e = double(Model::init(parse_family("lt_euler"), {}, 0).parameter_count());
    const double r4 = double(Model::init(parse_family("lt_rk4"), {}, 0).parameter_count());
    CHECK(r4 / e >= 4.0);
    CHECK(r4 / e <= 6.0);
  }

  TEST_CASE("archive round trip and mismatch") {
    const auto data = tiny_dataset(2);
    const Batch batch = make_batch(data);
    ModelOptions o;
    o.width = 4;
    o.cascades = 2;
    o.n_steps = 3;
    for (const char* name : {"ft_rk2", "fa_euler", "lt_rk2"}) {
      const Model m = Model::init(parse_family(name), o, 4);
      std::stringstream ss;
      write_archive(ss, m.to_archive());
      const Model back = Model::from_archive(read_archive(ss));
      CHECK(back.family() == m.family());
      CHECK(back.options().n_steps == 3);
      CHECK(back.options().cascades == 2);
      CHECK(back.options().width == 4);
      CHECK(bit_equal(back.reconstruct(batch), m.reconstruct(batch)));
    }
    ParamSet wrong = Model::init(parse_family("lt_euler"), o, 4).params();
    wrong.add("meta.family", Tensor::scalar(0, DType::f64));  // claims ft_euler
    wrong.add("meta.n_steps", Tensor::scalar(5, DType::f64));
    wrong.add("meta.cascades", Tensor::scalar(5, DType::f64));
    wrong.add("meta.dc_every_step", Tensor::scalar(1, DType::f64));
    CHECK_THROWS_AS(Model::from_archive(wrong), ConfigError);
    CHECK_THROWS_AS(Model::from_archive(Model::init(parse_family("ft_euler"), o, 4).params()), ConfigError);
  }

  TEST_CASE("zero parameters reconstruct the zero-filled image") {
    const auto data = tiny_dataset(2);
    const Batch batch = make_batch(data);
    for (const Family& f : all_families()) {
      ModelOptions o;
      o.width = 4;
      Model m = Model::init(f, o, 1);
      m.params() = m.params().zeros_like();
      CAPTURE(f.name());
      CHECK(max_abs_diff(m.reconstruct(batch), batch.zero_filled) < 1e-5);
    }
  }

  TEST_CASE("checkpointing changes no loss or gradient") {
    const auto data = tiny_dataset(2);
    const Batch batch = make_batch(data);
    for (const char* name : {"ft_rk4", "lt_rk2"}) {
      ModelOptions o;
      o.width = 6;
      Model plain = Model::init(parse_family(name), o, 3);
      o.checkpointing = true;
      const Model ckpt(plain.family(), o, plain.params());
      const LossGrad a = plain.loss_and_grad(batch), b = ckpt.loss_and_grad(batch);
      CHECK(std::abs(a.loss - b.loss) < 1e-6);
      for (std::size_t i = 0; i < a.grads.size(); ++i) CHECK(relative_l2(b.grads[i], a.grads[i]) < 1e-5);
    }
  }

  TEST_CASE("family gradient oracle on 8x8") {
    const CheckProblem problem = make_check_problem(8, 1);
    for (const char* name : {"ft_euler", "ft_rk2", "lt_euler", "lt_rk2"}) {
      ModelOptions o;
      o.width = 4;
      o.n_steps = 3;
      o.cascades = 2;
      Model m = Model::init(parse_family(name), o, 2, DType::f64);
      perturb_parameters(m, 2, 0.05);
      const FamilyGradCheck c = check_gradients(m, problem, 5, 3);
      CAPTURE(name);
      CAPTURE(c.worst);
      CHECK(c.coordinates > 30);
      CHECK(c.max_relative_error < 1e-3);
    }
  }

  TEST_CASE("adjoint gap shrinks with step count") {
    const CheckProblem problem = make_check_problem(8, 2);
    const int steps[] = {2, 4, 8};
    const auto gaps = adjoint_gaps(solvers::TableauKind::rk2, steps, problem, 3, 4);
    for (const auto& g : gaps) MESSAGE("rk2 n = " << g.n_steps << ": gap " << g.gap);
    CHECK(gaps[1].gap < gaps[0].gap);
    CHECK(gaps[2].gap < gaps[1].gap);
  }
}

TEST_SUITE("trainer") {
  TEST_CASE("split and score") {
    auto data = tiny_dataset(5);
    const DatasetSplit s = split_dataset(data, 2);
    CHECK(s.train.size() == 3);
    CHECK(s.val.size() == 2);
    CHECK(s.val[0].entry.id == data[3].entry.id);
    CHECK_THROWS_AS(split_dataset(data, 5), ConfigError);
    CHECK_THROWS_AS(split_dataset(data, 0), ConfigError);

    std::vector<mri::ComplexImage> truth;
    for (const auto& x : data) truth.push_back(x.image);
    const MetricsReport r = score(data, mri::stack(truth));
    for (const auto& m : r.samples) {
      CHECK(m.psnr == kPsnrIdentical);
      CHECK(std::abs(m.ssim - 1.0) < 1e-6);
    }
  }

  TEST_CASE("lr = 0 keeps the initial model; evaluation is read-only and reproducible") {
    const auto data = tiny_dataset(6);
    TrainConfig cfg = tiny_config("ft_euler");
    cfg.learning_rate = 0.0;
    const auto dir = temp_dir("lr0");
    const TrainResult r = train_model(data, cfg, dir);
    const Model init = Model::init(cfg.family, cfg.model_options(), derive_seed(cfg.seed, "model"));
    const DatasetSplit split = split_dataset(data, cfg.val_count);
    const MetricsReport untrained = evaluate(init, split.val, cfg.batch_size);
    REQUIRE(r.epochs.size() == 1);
    CHECK(r.epochs[0].val_psnr == untrained.mean_psnr);
    CHECK(r.epochs[0].val_ssim == untrained.mean_ssim);

    const Model final_model = Model::from_archive(load_archive(dir / "final.params"));
    for (std::size_t i = 0; i < init.params().size(); ++i)
      CHECK(bit_equal(final_model.params()[i].tensor, init.params()[i].tensor));

    write_report(dir / "a.csv", evaluate(final_model, split.val));
    write_report(dir / "b.csv", evaluate(final_model, split.val));
    auto slurp = [](const std::filesystem::path& p) {
      std::ifstream in(p);
      std::stringstream ss;
      ss << in.rdbuf();
      return ss.str();
    };
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));

    // MEAN row equals the mean of the per-sample rows.
    std::istringstream rows(slurp(dir / "a.csv"));
    std::string line;
    std::getline(rows, line);
    CHECK(line == "id,psnr,ssim");
    double sp = 0, ss = 0, mp = 0, ms = 0;
    int n = 0;
    while (std::getline(rows, line)) {
      const auto c1 = line.find(','), c2 = line.rfind(',');
      const double p = std::stod(line.substr(c1 + 1, c2 - c1 - 1)), s = std::stod(line.substr(c2 + 1));
      if (line.rfind("MEAN,", 0) == 0) {
        mp = p;
        ms = s;
      } else {
        sp += p;
        ss += s;
        ++n;
      }
    }
    CHECK(n == 2);
    CHECK(std::abs(mp - sp / n) < 1e-9);
    CHECK(std::abs(ms - ss / n) < 1e-9);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("training writes artifacts and is deterministic") {
    const auto data = tiny_dataset(6);
    TrainConfig cfg = tiny_config("lt_rk2");
    cfg.epochs = 2;
    const auto dir = temp_dir("det");
    std::ostringstream log;
    const TrainResult a = train_model(data, cfg, dir, &log);
    const TrainResult b = train_model(data, cfg);
    CHECK(a.batch_losses == b.batch_losses);
    CHECK(a.batch_losses.size() == 4);
    CHECK(std::filesystem::exists(dir / "best.params"));
    CHECK(std::filesystem::exists(dir / "final.params"));
    std::ifstream metrics(dir / "metrics.csv");
    std::string header, row;
    std::getline(metrics, header);
    CHECK(header == "epoch,train_loss,val_psnr,val_ssim,seconds,peak_bytes");
    int rows = 0;
    while (std::getline(metrics, row)) ++rows;
    CHECK(rows == 2);
    CHECK(log.str().find("epoch 2/2") != std::string::npos);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("fa family trains through the adjoint path") {
    const auto data = tiny_dataset(6);
    TrainConfig cfg = tiny_config("fa_rk2");
    const TrainResult r = train_model(data, cfg);
    CHECK(r.batch_losses.size() == 2);
    CHECK(std::isfinite(r.epochs[0].val_psnr));
  }

  TEST_CASE("checkpointing toggle: same losses, lower peak") {
    const auto data = tiny_dataset(6);
    TrainConfig cfg = tiny_config("lt_rk4");
    cfg.cascades = 3;
    const TrainResult plain = train_model(data, cfg);
    cfg.checkpointing = true;
    const TrainResult ckpt = train_model(data, cfg);
    for (std::size_t i = 0; i < plain.batch_losses.size(); ++i)
      CHECK(std::abs(plain.batch_losses[i] - ckpt.batch_losses[i]) < 1e-6);
    MESSAGE("peak bytes plain " << plain.epochs[0].peak_bytes << ", checkpointed " << ckpt.epochs[0].peak_bytes);
    CHECK(ckpt.epochs[0].peak_bytes < plain.epochs[0].peak_bytes);
  }

  TEST_CASE("divergence aborts with epoch and batch") {
    const auto data = tiny_dataset(6);
    TrainConfig cfg = tiny_config("ft_euler");
    cfg.learning_rate = 1e6;
    cfg.lookahead = false;
    cfg.optimizer = OptimizerKind::adam;
    cfg.epochs = 3;
    try {
      train_model(data, cfg);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      MESSAGE(std::string(e.what()));
      CHECK(std::string(e.what()).find("epoch ") == 0);
      CHECK(std::string(e.what()).find(" batch ") != std::string::npos);
    }
  }
}
