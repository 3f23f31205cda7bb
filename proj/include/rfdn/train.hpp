#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rfdn/arch.hpp"
#include "rfdn/data.hpp"
#include "rfdn/optim.hpp"

namespace rfdn {

struct TrainOptions {
  int batch_size = 64;
  int patch = 64;  // LR-side patch; the HR crop is scale times larger
  std::int64_t steps = 0;
  std::uint64_t seed = 0;
  LrSchedule schedule;
  bool full_dihedral = false;
  std::int64_t checkpoint_every = 0;  // 0: no intermediate checkpoints
  std::function<void(std::int64_t, const WeightStore&)> checkpoint;
};

struct LossRecord {
  std::int64_t step;
  double lr;
  double loss;
};

struct TrainResult {
  WeightStore weights;
  std::vector<LossRecord> trace;
};

/// Minimizes mean absolute error over random augmented patch batches with
/// Adam. Single-threaded and fully determined by the seed: two runs with
/// equal seeds produce bitwise-identical traces and weights.
inline TrainResult train_loop(const ModelConfig& cfg,
                              const std::vector<ImagePair>& data,
                              const TrainOptions& opt, WeightStore weights) {
  cfg.validate();
  if (data.empty()) throw ConfigError("train_loop: empty dataset");
  if (const std::string bad = first_mismatch(weights, model_layers(cfg));
      !bad.empty())
    throw ShapeError("train_loop: weight tensor mismatch at " + bad);

  std::mt19937_64 rng(opt.seed);
  AdamState<float> adam;
  TrainResult result;
  result.trace.reserve(static_cast<std::size_t>(opt.steps));

  const std::vector<LayerSpec> layers = model_layers(cfg);
  ad::Tape<float> tape;
  for (std::int64_t step = 1; step <= opt.steps; ++step) {
    auto [lr_batch, hr_batch] = sample_batch(data, opt.patch, opt.batch_size, rng);
    {
      // Patches are augmented as one aligned pair per batch element.
      Tensor<float> lr_one(1, 3, lr_batch.h(), lr_batch.w());
      Tensor<float> hr_one(1, 3, hr_batch.h(), hr_batch.w());
      for (int b = 0; b < opt.batch_size; ++b) {
        std::copy(lr_batch.data() + lr_batch.offset(b, 0, 0, 0),
                  lr_batch.data() + lr_batch.offset(b, 0, 0, 0) + lr_one.numel(),
                  lr_one.data());
        std::copy(hr_batch.data() + hr_batch.offset(b, 0, 0, 0),
                  hr_batch.data() + hr_batch.offset(b, 0, 0, 0) + hr_one.numel(),
                  hr_one.data());
        augment(lr_one, hr_one, rng, opt.full_dihedral);
        std::copy(lr_one.data(), lr_one.data() + lr_one.numel(),
                  lr_batch.data() + lr_batch.offset(b, 0, 0, 0));
        std::copy(hr_one.data(), hr_one.data() + hr_one.numel(),
                  hr_batch.data() + hr_batch.offset(b, 0, 0, 0));
      }
    }
    for (index_t i = 0; i < lr_batch.numel(); ++i) lr_batch[i] /= 255.0f;
    for (index_t i = 0; i < hr_batch.numel(); ++i) hr_batch[i] /= 255.0f;

    tape.clear();
    TypedWeights<float> tw(weights, layers);
    TapeCtx<float> cx(tape, tw);
    ad::Var x = tape.leaf(std::move(lr_batch));
    ad::Var target = tape.leaf(std::move(hr_batch));
    ad::Var pred = model_forward(cx, x, cfg);
    ad::Var loss = tape.l1_loss(pred, target);
    tape.backward(loss);

    std::map<std::string, Tensor<float>> grads;
    for (const auto& [name, conv] : cx.params) {
      grads.emplace(name + ".weight", tape.grad(conv.kernel));
      grads.emplace(name + ".bias", tape.grad(conv.bias));
    }
    const double lr = opt.schedule.at(step - 1);
    adam_step(weights, grads, adam, static_cast<float>(lr));

    result.trace.push_back(
        {step, lr, static_cast<double>(tape.value(loss)[0])});
    if (opt.checkpoint && opt.checkpoint_every > 0 &&
        step % opt.checkpoint_every == 0)
      opt.checkpoint(step, weights);
  }
  result.weights = std::move(weights);
  return result;
}

}  // namespace rfdn
