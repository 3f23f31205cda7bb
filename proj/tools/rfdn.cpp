// Command-line surface: degrade / train / sr / eval / analyze.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <atomic>
#include <mutex>
#include <thread>

#include "rfdn/arch.hpp"
#include "rfdn/data.hpp"
#include "rfdn/image_io.hpp"
#include "rfdn/metrics.hpp"
#include "rfdn/run_config.hpp"
#include "rfdn/train.hpp"
#include "rfdn/weight_file.hpp"

namespace fs = std::filesystem;
using namespace rfdn;

namespace {

int worker_count(std::size_t jobs) {
  unsigned n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("RFDN_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return static_cast<int>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

std::string stem_of(const std::string& path) {
  return fs::path(path).stem().string();
}

std::vector<ImagePair> load_dataset(const std::string& hr_dir, int scale) {
  std::vector<ImagePair> pairs;
  for (const std::string& path : list_images(hr_dir))
    pairs.push_back(degrade(load_image(path), scale, stem_of(path)));
  if (pairs.empty()) throw IoError("no images found in '" + hr_dir + "'");
  return pairs;
}

struct TrainFlags {
  std::string hr_dir, resume, out = "rfdn_out";
  int scale = 2;
  int channels = 48;
  int blocks = 6;
  double rate = 0.5;
  std::int64_t steps = 0;
  std::uint64_t seed = 0;
  int batch = 64;
  int patch = 64;
  double lr = 5e-4;
  std::int64_t half_life = 200000;
  std::int64_t checkpoint_every = 0;
  bool full_dihedral = false;
};

// Applies config-file values for every flag not given on the command line.
// Unknown keys are fatal and named in the message.
void apply_train_config(const std::string& path, const CLI::App& train_cmd,
                        TrainFlags& f) {
  const auto parse_i64 = [](const std::string& k, const std::string& v) {
    try {
      return static_cast<std::int64_t>(std::stoll(v));
    } catch (...) {
      throw UsageError("config key '" + k + "' has non-integer value '" + v +
                       "'");
    }
  };
  const auto parse_f64 = [](const std::string& k, const std::string& v) {
    try {
      return std::stod(v);
    } catch (...) {
      throw UsageError("config key '" + k + "' has non-numeric value '" + v +
                       "'");
    }
  };
  for (const auto& [key, value] : parse_run_config(path)) {
    const CLI::Option* opt = train_cmd.get_option_no_throw("--" + key);
    if (!opt) throw UsageError("unknown config key '" + key + "'");
    if (opt->count() > 0) continue;  // CLI flags win
    if (key == "hr-dir") {
      f.hr_dir = value;
    } else if (key == "scale") {
      f.scale = static_cast<int>(parse_i64(key, value));
    } else if (key == "channels") {
      f.channels = static_cast<int>(parse_i64(key, value));
    } else if (key == "blocks") {
      f.blocks = static_cast<int>(parse_i64(key, value));
    } else if (key == "rate") {
      f.rate = parse_f64(key, value);
    } else if (key == "steps") {
      f.steps = parse_i64(key, value);
    } else if (key == "seed") {
      f.seed = static_cast<std::uint64_t>(parse_i64(key, value));
    } else if (key == "resume") {
      f.resume = value;
    } else if (key == "out") {
      f.out = value;
    } else if (key == "batch") {
      f.batch = static_cast<int>(parse_i64(key, value));
    } else if (key == "patch") {
      f.patch = static_cast<int>(parse_i64(key, value));
    } else if (key == "lr") {
      f.lr = parse_f64(key, value);
    } else if (key == "half-life") {
      f.half_life = parse_i64(key, value);
    } else if (key == "checkpoint-every") {
      f.checkpoint_every = parse_i64(key, value);
    } else if (key == "full-dihedral") {
      f.full_dihedral = value == "1" || value == "true";
    } else {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
}

int cmd_degrade(const std::string& hr_dir, int scale,
                const std::string& out_dir) {
  const auto paths = list_images(hr_dir);
  if (paths.empty()) throw IoError("no images found in '" + hr_dir + "'");
  fs::create_directories(out_dir);
  std::vector<std::string> written;
  try {
    for (const std::string& path : paths) {
      const ImagePair pair = degrade(load_image(path), scale, stem_of(path));
      const std::string out =
          (fs::path(out_dir) /
           (stem_of(path) + "x" + std::to_string(scale) + ".png"))
              .string();
      save_image(pair.lr, out);
      written.push_back(out);
      std::printf("%s %s -> %s\n", pair.id.c_str(),
                  pair.hr.shape().str().c_str(), pair.lr.shape().str().c_str());
    }
  } catch (...) {
    for (const std::string& f : written) fs::remove(f);
    throw;
  }
  return 0;
}

int cmd_train(const TrainFlags& f) {
  ModelConfig cfg{f.scale, f.channels, f.blocks, f.rate};
  cfg.validate();
  const auto layers = model_layers(cfg);

  std::mt19937_64 init_rng(f.seed);
  WeightStore weights = init_weights(layers, f.seed);
  if (!f.resume.empty()) {
    // Warm start: adopt every matching tensor; the reconstruction head may
    // legitimately change shape with the scale and is re-initialized then.
    WeightStore prev = read_weight_file(f.resume);
    for (auto& [name, t] : weights) {
      const auto it = prev.find(name);
      if (it == prev.end()) {
        if (name.rfind("recon.", 0) == 0) continue;
        throw ShapeError("resume file lacks tensor " + name);
      }
      if (it->second.shape() == t.shape()) {
        t = it->second;
      } else if (name.rfind("recon.", 0) != 0) {
        throw ShapeError("resume tensor shape mismatch at " + name);
      }
    }
  }

  fs::create_directories(f.out);
  const std::string trace_path = (fs::path(f.out) / "loss_trace.txt").string();
  const std::string final_path = (fs::path(f.out) / "weights.rfdw").string();

  TrainOptions opt;
  opt.batch_size = f.batch;
  opt.patch = f.patch;
  opt.steps = f.steps;
  opt.seed = f.seed;
  opt.schedule = {f.lr, f.half_life};
  opt.full_dihedral = f.full_dihedral;
  opt.checkpoint_every = f.checkpoint_every;
  opt.checkpoint = [&](std::int64_t step, const WeightStore& w) {
    write_weight_file(
        w, (fs::path(f.out) / ("checkpoint_" + std::to_string(step) + ".rfdw"))
               .string());
  };

  TrainResult result;
  if (f.steps > 0) {
    const auto data = load_dataset(f.hr_dir, f.scale);
    result = train_loop(cfg, data, opt, std::move(weights));
  } else {
    result.weights = std::move(weights);
  }

  std::ofstream trace(trace_path, std::ios::trunc);
  if (!trace) throw IoError("cannot write '" + trace_path + "'");
  for (const LossRecord& r : result.trace) {
    char line[96];
    std::snprintf(line, sizeof(line), "%lld %.12g %.12g\n",
                  static_cast<long long>(r.step), r.lr, r.loss);
    trace << line;
  }
  write_weight_file(result.weights, final_path);
  std::printf("wrote %s (%lld tensors, %lld parameters)\n", final_path.c_str(),
              static_cast<long long>(result.weights.size()),
              static_cast<long long>(param_count(result.weights)));
  if (!result.trace.empty())
    std::printf("final loss %.6g after %lld steps\n",
                result.trace.back().loss,
                static_cast<long long>(f.steps));
  return 0;
}

ModelConfig load_model(const std::string& weight_path, int scale,
                       WeightStore& store) {
  store = read_weight_file(weight_path);
  const ModelConfig cfg = infer_config(store);
  if (cfg.scale != scale)
    throw ShapeError("recon.weight is built for scale " +
                     std::to_string(cfg.scale) + ", not " +
                     std::to_string(scale));
  if (const std::string bad = first_mismatch(store, model_layers(cfg));
      !bad.empty())
    throw ShapeError("weight/config mismatch at " + bad);
  return cfg;
}

int cmd_sr(const std::string& weight_path, const std::string& in,
           const std::string& out, int scale) {
  WeightStore store;
  const ModelConfig cfg = load_model(weight_path, scale, store);
  const Tensor<float> lr = load_image(in);
  TypedWeights<float> tw(store, model_layers(cfg));
  Tensor<float> sr = super_resolve(cfg, tw, lr);
  save_image(sr, out);
  std::printf("%s %s -> %s %s\n", in.c_str(), lr.shape().str().c_str(),
              out.c_str(), sr.shape().str().c_str());
  return 0;
}

int cmd_eval(const std::string& weight_path, bool bicubic,
             const std::string& hr_dir, int scale, int shave) {
  if (shave < 0) shave = scale;
  WeightStore store;
  ModelConfig cfg;
  if (!bicubic) cfg = load_model(weight_path, scale, store);

  const auto paths = list_images(hr_dir);
  if (paths.empty()) throw IoError("no images found in '" + hr_dir + "'");

  struct Row {
    std::string name;
    EvalResult r;
  };
  std::vector<Row> rows(paths.size());
  std::exception_ptr error;
  std::mutex error_mu;
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    try {
      TypedWeights<float> tw;
      if (!bicubic) tw = TypedWeights<float>(store, model_layers(cfg));
      for (std::size_t i = next.fetch_add(1); i < paths.size();
           i = next.fetch_add(1)) {
        const ImagePair pair =
            degrade(load_image(paths[i]), scale, stem_of(paths[i]));
        Tensor<float> sr =
            bicubic
                ? bicubic_resize(pair.lr, double(scale), /*antialias=*/true)
                : super_resolve(cfg, tw, pair.lr);
        quantize_255(sr);
        rows[i] = Row{pair.id, evaluate_pair(sr, pair.hr, shave)};
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mu);
      if (!error) error = std::current_exception();
    }
  };
  const int nthreads = worker_count(paths.size());
  std::vector<std::thread> threads;
  for (int t = 1; t < nthreads; ++t) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);

  double psnr_sum = 0, ssim_sum = 0;
  for (const Row& row : rows) {
    std::printf("%s %.4f %.4f\n", row.name.c_str(), row.r.psnr_db, row.r.ssim);
    psnr_sum += row.r.psnr_db;
    ssim_sum += row.r.ssim;
  }
  std::printf("mean %.4f %.4f\n", psnr_sum / double(rows.size()),
              ssim_sum / double(rows.size()));
  return 0;
}

int cmd_analyze(int channels, int blocks, double rate, int scale,
                const std::string& variant, const std::string& hr_size) {
  ModelConfig cfg{scale, channels, blocks, rate};
  cfg.validate();
  const BlockKind kind = block_kind_from_string(variant);
  std::int64_t hw = 1280, hh = 720;
  if (!hr_size.empty()) {
    const auto xpos = hr_size.find('x');
    if (xpos == std::string::npos)
      throw UsageError("--hr-size expects WxH, got '" + hr_size + "'");
    hw = std::stoll(hr_size.substr(0, xpos));
    hh = std::stoll(hr_size.substr(xpos + 1));
    if (hw <= 0 || hh <= 0) throw UsageError("--hr-size must be positive");
  }
  const auto layers = model_layers(cfg, kind);
  const std::int64_t params = param_count(layers);
  const std::int64_t macs = mult_adds(layers, cfg.scale, hh, hw);
  std::printf("variant %s\n", to_string(kind).c_str());
  std::printf("params %lld (%.1fK)\n", static_cast<long long>(params),
              double(params) / 1e3);
  std::printf("mult_adds %lld (%.2f GMac @ %lldx%lld)\n",
              static_cast<long long>(macs), double(macs) / 1e9,
              static_cast<long long>(hw), static_cast<long long>(hh));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residual feature distillation super-resolution engine"};
  app.require_subcommand(1);

  // degrade
  auto* degrade_cmd =
      app.add_subcommand("degrade", "Generate bicubic LR images from HR");
  std::string d_hr, d_out;
  int d_scale = 2;
  degrade_cmd->add_option("--hr-dir", d_hr, "HR image directory")->required();
  degrade_cmd->add_option("--scale", d_scale, "downscale factor")->required();
  degrade_cmd->add_option("--out-dir", d_out, "output directory")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  TrainFlags tf;
  std::string train_config;
  train_cmd->add_option("--config", train_config,
                        "key=value file mirroring the flags");
  train_cmd->add_option("--hr-dir", tf.hr_dir, "HR image directory");
  train_cmd->add_option("--scale", tf.scale, "upscale factor");
  train_cmd->add_option("--channels", tf.channels, "feature width");
  train_cmd->add_option("--blocks", tf.blocks, "block count");
  train_cmd->add_option("--rate", tf.rate, "distillation rate");
  train_cmd->add_option("--steps", tf.steps, "minibatch updates");
  train_cmd->add_option("--seed", tf.seed, "RNG seed");
  train_cmd->add_option("--resume", tf.resume, "warm-start weight file");
  train_cmd->add_option("--out", tf.out, "output directory");
  train_cmd->add_option("--batch", tf.batch, "minibatch size");
  train_cmd->add_option("--patch", tf.patch, "LR patch side");
  train_cmd->add_option("--lr", tf.lr, "initial learning rate");
  train_cmd->add_option("--half-life", tf.half_life,
                        "steps between learning-rate halvings");
  train_cmd->add_option("--checkpoint-every", tf.checkpoint_every,
                        "checkpoint cadence (0: final only)");
  train_cmd->add_flag("--full-dihedral", tf.full_dihedral,
                      "augment with all four quarter turns");

  // sr
  auto* sr_cmd = app.add_subcommand("sr", "Super-resolve one image");
  std::string s_weights, s_in, s_out;
  int s_scale = 2;
  sr_cmd->add_option("--weights", s_weights, "weight file")->required();
  sr_cmd->add_option("--in", s_in, "input LR image")->required();
  sr_cmd->add_option("--out", s_out, "output image")->required();
  sr_cmd->add_option("--scale", s_scale, "upscale factor")->required();

  // eval
  auto* eval_cmd =
      app.add_subcommand("eval", "Y-channel PSNR/SSIM over a dataset");
  std::string e_weights, e_hr;
  bool e_bicubic = false;
  int e_scale = 2, e_shave = -1;
  eval_cmd->add_option("--weights", e_weights, "weight file");
  eval_cmd->add_flag("--bicubic", e_bicubic, "evaluate the bicubic baseline");
  eval_cmd->add_option("--hr-dir", e_hr, "HR image directory")->required();
  eval_cmd->add_option("--scale", e_scale, "upscale factor")->required();
  eval_cmd->add_option("--shave", e_shave, "border crop (default: scale)");

  // analyze
  auto* an_cmd =
      app.add_subcommand("analyze", "Parameter and Mult-Adds counters");
  int a_channels = 48, a_blocks = 6, a_scale = 4;
  double a_rate = 0.5;
  std::string a_variant = "rfdb", a_hr_size = "1280x720";
  an_cmd->add_option("--channels", a_channels, "feature width");
  an_cmd->add_option("--blocks", a_blocks, "block count");
  an_cmd->add_option("--rate", a_rate, "distillation rate");
  an_cmd->add_option("--scale", a_scale, "upscale factor");
  an_cmd->add_option("--variant", a_variant, "base|srb|fdc|rfdb|imdb|imdb_r");
  an_cmd->add_option("--hr-size", a_hr_size, "output size WxH for Mult-Adds");

  try {
    app.parse(argc, argv);
    if (degrade_cmd->parsed()) return cmd_degrade(d_hr, d_scale, d_out);
    if (train_cmd->parsed()) {
      if (!train_config.empty())
        apply_train_config(train_config, *train_cmd, tf);
      return cmd_train(tf);
    }
    if (sr_cmd->parsed()) return cmd_sr(s_weights, s_in, s_out, s_scale);
    if (eval_cmd->parsed()) {
      if (e_bicubic == !e_weights.empty())
        throw UsageError("eval needs exactly one of --weights or --bicubic");
      return cmd_eval(e_weights, e_bicubic, e_hr, e_scale, e_shave);
    }
    if (an_cmd->parsed())
      return cmd_analyze(a_channels, a_blocks, a_rate, a_scale, a_variant,
                         a_hr_size);
    return 1;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
