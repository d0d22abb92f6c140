#pragma once

// MSE training with Adam and a piecewise-constant learning-rate schedule.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "lfae/augment.hpp"
#include "lfae/codec_io.hpp"
#include "lfae/errors.hpp"
#include "lfae/model.hpp"
#include "lfae/optimizer.hpp"

namespace lfae {

struct LrStep {
    std::size_t epoch_start = 0;
    double lr = 0.0;
    friend bool operator==(const LrStep&, const LrStep&) = default;
};

struct TrainConfig {
    std::size_t batch_size = 4;
    std::size_t iterations_per_epoch = 30;
    std::vector<LrStep> lr_schedule{{0, 0.001}, {30, 0.0005}, {60, 0.0002}, {90, 0.0001}};
    /// 200 epochs of 30 iterations: 6000 iterations.
    std::size_t total_epochs = 200;
    AdamConfig adam;
    std::uint64_t seed = 0;
    /// Checkpoint cadence in epochs; no checkpoints when `checkpoint_dir` is empty.
    std::size_t checkpoint_every = 10;
    std::filesystem::path checkpoint_dir;
};

inline void validate(const TrainConfig& cfg)
{
    if (cfg.batch_size == 0) {
        throw ConfigError("batch size must be at least 1");
    }
    if (cfg.iterations_per_epoch == 0) {
        throw ConfigError("iterations per epoch must be at least 1");
    }
    if (cfg.lr_schedule.empty() || cfg.lr_schedule.front().epoch_start != 0) {
        throw ConfigError("learning-rate schedule must start at epoch 0");
    }
    for (std::size_t i = 1; i < cfg.lr_schedule.size(); ++i) {
        if (cfg.lr_schedule[i].epoch_start <= cfg.lr_schedule[i - 1].epoch_start) {
            throw ConfigError("learning-rate schedule epochs must be strictly increasing");
        }
        if (cfg.lr_schedule[i].lr >= cfg.lr_schedule[i - 1].lr) {
            throw ConfigError("learning-rate schedule rates must be strictly decreasing");
        }
    }
    if (cfg.lr_schedule.back().lr < 0.0) {
        throw ConfigError("learning rates must be non-negative");
    }
    if (cfg.checkpoint_every == 0) {
        throw ConfigError("checkpoint interval must be at least 1 epoch");
    }
}

/// Rate of the latest schedule entry starting at or before `epoch`.
inline double lr_for_epoch(const TrainConfig& cfg, std::size_t epoch)
{
    double lr = cfg.lr_schedule.front().lr;
    for (const LrStep& s : cfg.lr_schedule) {
        if (s.epoch_start <= epoch) {
            lr = s.lr;
        }
    }
    return lr;
}

template <class T>
struct MseResult {
    double loss = 0.0;
    Tensor<T> grad;
};

/// loss = mean((pred - target)^2), grad = 2 (pred - target) / N.
template <class T>
MseResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target)
{
    if (pred.shape() != target.shape()) {
        throw ShapeError("mse_loss: prediction " + to_string(pred.shape()) + " vs target " +
                         to_string(target.shape()));
    }
    const std::size_t n = pred.size();
    MseResult<T> r{0.0, Tensor<T>(pred.shape())};
    if (n == 0) {
        return r;
    }
    double acc = 0.0;
    const double scale = 2.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
        acc += d * d;
        r.grad[i] = static_cast<T>(scale * d);
    }
    r.loss = acc / static_cast<double>(n);
    return r;
}

/// One forward, MSE against the input, full backward and one Adam update.
/// Returns the loss of the pre-update parameters.
template <class T>
double train_iteration(Model<T>& model, const Tensor<T>& batch, AdamState<T>& state, double lr,
                       const AdamConfig& adam = {})
{
    if (model.mode != Mode::train) {
        throw ConfigError("train_iteration: model must be in train mode");
    }
    ForwardCache<T> cache;
    const Tensor<T> out = forward(model, batch, &cache);
    MseResult<T> loss = mse_loss(out, batch);
    BackwardResult<T> back = backward(model, cache, loss.grad);
    const auto params = parameters(model);
    const auto grads = gradients(back.grads);
    adam_step<T>(params, grads, state, lr, adam);
    return loss.loss;
}

template <class T>
double train_iteration(Model<T>& model, const std::vector<LightField>& batch, AdamState<T>& state, double lr,
                       const AdamConfig& adam = {})
{
    for (const LightField& lf : batch) {
        check_light_field(model.config, lf, "train_iteration");
    }
    return train_iteration(model, stack_batch<T>(batch), state, lr, adam);
}

struct EpochRecord {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_mse = 0.0;
    std::optional<double> test_mse;
    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
};

inline void write_history_csv(const TrainHistory& h, std::ostream& os)
{
    os << "epoch,lr,train_mse,test_mse\n";
    for (const EpochRecord& r : h.epochs) {
        os << fmt::format("{},{},{},", r.epoch, r.lr, r.train_mse);
        if (r.test_mse) {
            os << fmt::format("{}", *r.test_mse);
        }
        os << '\n';
    }
}

inline void write_history_csv(const TrainHistory& h, const std::filesystem::path& path)
{
    std::ofstream os(path);
    if (!os) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    write_history_csv(h, os);
    if (!os) {
        throw IoError("failed writing " + path.string());
    }
}

/// Mean eval-mode reconstruction MSE over `fields`.
template <class T>
double reconstruction_mse(const Model<T>& model, const std::vector<LightField>& fields)
{
    if (fields.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (const LightField& lf : fields) {
        check_light_field(model.config, lf, "reconstruction_mse");
        const Tensor<T> x = stack_views<T>(lf);
        const Tensor<T> y = decode_latent(model, encode_latent(model, x), extract_center(model.config, x));
        total += mse_loss(y, x).loss;
    }
    return total / static_cast<double>(fields.size());
}

/// Optimizer state and progress carried across calls to `train`.
template <class T>
struct TrainerState {
    AdamState<T> optimizer;
    std::uint64_t completed_epochs = 0;
};

struct TrainHooks {
    std::vector<LightField> test_fields;
    std::function<void(const EpochRecord&)> on_epoch;
};

inline std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t epoch)
{
    return dir / fmt::format("epoch_{:04}.lfck", epoch);
}

/// Runs epochs [state.completed_epochs, cfg.total_epochs). Batches for global
/// iteration i come from sampler.batch(i, batch_size), so resuming from a
/// checkpoint reproduces an uninterrupted run exactly.
template <class T>
TrainHistory train(Model<T>& model, const StreamingSampler& sampler, const TrainConfig& cfg,
                   TrainerState<T>& state, const TrainHooks& hooks = {})
{
    validate(cfg);
    TrainHistory history;
    if (!cfg.checkpoint_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(cfg.checkpoint_dir, ec);
        if (ec) {
            throw IoError("cannot create checkpoint directory " + cfg.checkpoint_dir.string() + ": " + ec.message());
        }
    }
    for (std::size_t epoch = state.completed_epochs; epoch < cfg.total_epochs; ++epoch) {
        const double lr = lr_for_epoch(cfg, epoch);
        model.mode = Mode::train;
        double total = 0.0;
        for (std::size_t it = 0; it < cfg.iterations_per_epoch; ++it) {
            const std::uint64_t global = static_cast<std::uint64_t>(epoch) * cfg.iterations_per_epoch + it;
            total += train_iteration(model, sampler.batch(global, cfg.batch_size), state.optimizer, lr, cfg.adam);
        }
        EpochRecord rec{epoch, lr, total / static_cast<double>(cfg.iterations_per_epoch), std::nullopt};
        model.mode = Mode::eval;
        if (!hooks.test_fields.empty()) {
            rec.test_mse = reconstruction_mse(model, hooks.test_fields);
        }
        state.completed_epochs = epoch + 1;
        history.epochs.push_back(rec);
        if (hooks.on_epoch) {
            hooks.on_epoch(rec);
        }
        if (!cfg.checkpoint_dir.empty() && state.completed_epochs % cfg.checkpoint_every == 0) {
            const auto path = checkpoint_path(cfg.checkpoint_dir, state.completed_epochs);
            try {
                write_checkpoint_file(Checkpoint<T>{model, state.optimizer, state.completed_epochs}, path);
            } catch (const IoError& e) {
                throw IoError("checkpoint write failed at " + path.string() + ": " + e.what());
            }
        }
    }
    model.mode = Mode::eval;
    return history;
}

} // namespace lfae
