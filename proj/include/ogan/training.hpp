#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "adam.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "image.hpp"
#include "losses.hpp"
#include "networks.hpp"
#include "occlusion.hpp"
#include "rng.hpp"

namespace ogan {

struct TrainingConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 1;
    AdamHyperParams adam{};
    double l1_weight = 100.0;  // 0 leaves the pure conditional adversarial objective
    std::uint64_t seed = 0;
    UNetSpec generator{};
    DiscriminatorSpec discriminator{};
    std::size_t checkpoint_every = 10;  // 0 = only at completion
    bool saturating_generator_loss = false;

    void validate() const {
        if (batch_size == 0) throw ArgumentError("train.batch_size must be positive");
        if (!(adam.learning_rate > 0.0)) throw ArgumentError("train.learning_rate must be positive");
        if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
            throw ArgumentError("train.beta1/beta2 must lie in [0, 1)");
        if (!(adam.epsilon > 0.0)) throw ArgumentError("train.epsilon must be positive");
        if (!(l1_weight >= 0.0)) throw ArgumentError("train.l1_weight must be non-negative");
        if (generator.input_channels != discriminator.image_channels ||
            generator.output_channels != discriminator.image_channels)
            throw ArgumentError("generator and discriminator disagree on image channels");
        generator.validate();
        discriminator.validate();
    }

    KeyValueConfig to_config() const {
        KeyValueConfig c;
        const auto d = KeyValueConfig::format_double;
        c.set("seed", std::to_string(seed));
        c.set("train.epochs", std::to_string(epochs));
        c.set("train.batch_size", std::to_string(batch_size));
        c.set("train.learning_rate", d(adam.learning_rate));
        c.set("train.beta1", d(adam.beta1));
        c.set("train.beta2", d(adam.beta2));
        c.set("train.epsilon", d(adam.epsilon));
        c.set("train.l1_weight", d(l1_weight));
        c.set("train.checkpoint_every", std::to_string(checkpoint_every));
        c.set("train.saturating_loss", saturating_generator_loss ? "true" : "false");
        c.set("model.channels", std::to_string(generator.input_channels));
        c.set("model.depth", std::to_string(generator.depth));
        c.set("model.base_width", std::to_string(generator.base_width));
        c.set("model.dropout", d(generator.dropout_rate));
        c.set("model.leaky_slope", d(generator.leaky_slope));
        std::string widths;
        for (std::size_t i = 0; i < discriminator.widths.size(); ++i)
            widths += (i ? "," : "") + std::to_string(discriminator.widths[i]);
        c.set("model.disc_widths", widths);
        c.set("model.patch_discriminator", discriminator.patch_output ? "true" : "false");
        return c;
    }

    /// Reads the keys written by to_config(); other keys are ignored.
    static TrainingConfig from_config(const KeyValueConfig& c) {
        TrainingConfig t;
        t.seed = c.get_u64("seed");
        t.epochs = c.get_u64("train.epochs");
        t.batch_size = c.get_u64("train.batch_size");
        t.adam.learning_rate = c.get_double("train.learning_rate");
        t.adam.beta1 = c.get_double("train.beta1");
        t.adam.beta2 = c.get_double("train.beta2");
        t.adam.epsilon = c.get_double("train.epsilon");
        t.l1_weight = c.get_double("train.l1_weight");
        t.checkpoint_every = c.get_u64("train.checkpoint_every");
        t.saturating_generator_loss = c.get_bool("train.saturating_loss");
        const auto channels = c.get_u64("model.channels");
        t.generator.input_channels = t.generator.output_channels = channels;
        t.discriminator.image_channels = channels;
        t.generator.depth = c.get_u64("model.depth");
        t.generator.base_width = c.get_u64("model.base_width");
        t.generator.dropout_rate = c.get_double("model.dropout");
        t.generator.leaky_slope = t.discriminator.leaky_slope = c.get_double("model.leaky_slope");
        t.discriminator.widths.clear();
        std::istringstream ws(c.get("model.disc_widths"));
        for (std::string item; std::getline(ws, item, ',');)
            t.discriminator.widths.push_back(KeyValueConfig::parse_number<std::size_t>("model.disc_widths", item));
        t.discriminator.patch_output = c.get_bool("model.patch_discriminator");
        t.validate();
        return t;
    }
};

/// Epoch means of the per-step quantities.
struct LossRow {
    std::size_t epoch = 0;
    double discriminator_loss = 0.0;
    double generator_adversarial = 0.0;
    double generator_l1 = 0.0;
    double accuracy_real = 0.0;  // fraction of real pairs scored > 0.5
    double accuracy_fake = 0.0;  // fraction of generated pairs scored < 0.5

    friend bool operator==(const LossRow&, const LossRow&) = default;
};

struct LossReport {
    std::vector<LossRow> rows;

    std::string to_tsv() const {
        std::ostringstream os;
        os << "epoch\td_loss\tg_adv\tg_l1\td_acc_real\td_acc_fake\n";
        const auto d = KeyValueConfig::format_double;
        for (const auto& r : rows)
            os << r.epoch << '\t' << d(r.discriminator_loss) << '\t' << d(r.generator_adversarial) << '\t'
               << d(r.generator_l1) << '\t' << d(r.accuracy_real) << '\t' << d(r.accuracy_fake) << '\n';
        return os.str();
    }

    friend bool operator==(const LossReport&, const LossReport&) = default;
};

/// Normalized training example; every tensor is [1, C, H, W].
template <typename T>
struct TrainingSample {
    Tensor<T> x;
    Tensor<T> y;
    Tensor<T> mask;
};

template <typename T>
TrainingSample<T> to_sample(const ImagePair& p) {
    return {image_to_tensor<T>(p.x), image_to_tensor<T>(p.y), mask_to_tensor<T>(p.mask)};
}

/// Concatenates [1,C,H,W] tensors along the batch axis.
template <typename T>
Tensor<T> stack_batch(const std::vector<Tensor<T>>& items) {
    if (items.empty()) throw ArgumentError("stack_batch: empty batch");
    const Shape& s = items.front().shape();
    std::vector<T> v;
    v.reserve(items.size() * s.numel());
    for (const auto& t : items) {
        if (t.shape() != s) throw ShapeError("stack_batch: " + t.shape().str() + " vs " + s.str());
        v.insert(v.end(), t.data().begin(), t.data().end());
    }
    return Tensor<T>::from(Shape{items.size() * s[0], s[1], s[2], s[3]}, std::move(v));
}

struct StepStats {
    double discriminator_loss = 0.0;
    double generator_adversarial = 0.0;
    double generator_l1 = 0.0;
    double accuracy_real = 0.0;
    double accuracy_fake = 0.0;
};

/// Generator, discriminator and their optimizer states, advanced by
/// alternating updates: one discriminator step, then one generator step.
///
/// Every random stream is derived from (seed, epoch, step), so the epoch
/// counter plus the seed is the complete random state of a run.
template <typename T = float>
class GanTrainer {
public:
    explicit GanTrainer(const TrainingConfig& cfg)
        : config_(cfg),
          generator_((cfg.validate(), cfg.generator), derive_seed(cfg.seed, 0x67656eULL)),
          discriminator_(cfg.discriminator, derive_seed(cfg.seed, 0x646973ULL)),
          generator_state_(generator_.params(), cfg.adam),
          discriminator_state_(discriminator_.params(), cfg.adam) {}

    const TrainingConfig& config() const noexcept { return config_; }
    std::size_t epoch() const noexcept { return epoch_; }
    UNetGenerator<T>& generator() noexcept { return generator_; }
    const UNetGenerator<T>& generator() const noexcept { return generator_; }
    Discriminator<T>& discriminator() noexcept { return discriminator_; }
    const Discriminator<T>& discriminator() const noexcept { return discriminator_; }
    const AdamState<T>& generator_state() const noexcept { return generator_state_; }
    const AdamState<T>& discriminator_state() const noexcept { return discriminator_state_; }

    /// One discriminator update on real (y, x) and given fake (fake, x) pairs.
    StepStats train_discriminator(const Tensor<T>& y, const Tensor<T>& fake, const Tensor<T>& x) {
        Tape<T> tape;
        auto d_real = discriminator_.forward(tape, y, x);
        auto d_fake = discriminator_.forward(tape, fake.detach(), x);
        auto loss = discriminator_loss(tape, d_real, d_fake);
        StepStats s;
        s.discriminator_loss = static_cast<double>(loss.item());
        require_finite(s.discriminator_loss, "discriminator loss");
        s.accuracy_real = fraction(d_real, [](T p) { return p > T(0.5); });
        s.accuracy_fake = fraction(d_fake, [](T p) { return p < T(0.5); });
        discriminator_.params().zero_grad();
        backward(loss, tape);
        adam_step(discriminator_.params(), discriminator_state_);
        return s;
    }

    /// Discriminator step on detached fakes, then generator step through the discriminator.
    StepStats train_step(const Tensor<T>& x, const Tensor<T>& y, std::uint64_t dropout_seed) {
        if (x.shape() != y.shape()) throw ShapeError("train_step: x " + x.shape().str() + " vs y " + y.shape().str());
        Tape<T> tape;
        auto fake = generator_.forward(tape, x, {Mode::train, dropout_seed, {}});
        StepStats s = train_discriminator(y, fake, x);

        // Discriminator weights stay fixed for the generator update.
        Frozen frozen(discriminator_.params());
        auto d_fake = discriminator_.forward(tape, fake, x);
        auto terms = generator_loss(tape, d_fake, fake, y, config_.l1_weight, config_.saturating_generator_loss);
        s.generator_adversarial = static_cast<double>(terms.adversarial.item());
        s.generator_l1 = static_cast<double>(terms.l1.item());
        require_finite(static_cast<double>(terms.total.item()), "generator loss");
        generator_.params().zero_grad();
        backward(terms.total, tape);
        adam_step(generator_.params(), generator_state_);
        return s;
    }

    /// One pass over `data` in a seeded shuffle order.
    LossRow run_epoch(const std::vector<TrainingSample<T>>& data) {
        if (data.empty()) throw ArgumentError("training split is empty");
        std::vector<std::size_t> order(data.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(config_.seed, 0x73687566ULL, epoch_));
        for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

        StepStats total;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < order.size(); start += config_.batch_size, ++steps) {
            std::vector<Tensor<T>> xs, ys;
            for (std::size_t k = start; k < std::min(order.size(), start + config_.batch_size); ++k) {
                xs.push_back(data[order[k]].x);
                ys.push_back(data[order[k]].y);
            }
            StepStats s;
            try {
                s = train_step(stack_batch(xs), stack_batch(ys), derive_seed(config_.seed, epoch_, steps));
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch_ + 1) + " step " +
                                   std::to_string(steps));
            }
            total.discriminator_loss += s.discriminator_loss;
            total.generator_adversarial += s.generator_adversarial;
            total.generator_l1 += s.generator_l1;
            total.accuracy_real += s.accuracy_real;
            total.accuracy_fake += s.accuracy_fake;
        }
        ++epoch_;
        const double n = static_cast<double>(steps);
        return {epoch_,
                total.discriminator_loss / n,
                total.generator_adversarial / n,
                total.generator_l1 / n,
                total.accuracy_real / n,
                total.accuracy_fake / n};
    }

    Checkpoint checkpoint() const {
        Checkpoint c;
        c.epoch = epoch_;
        KeyValueConfig cfg = config_.to_config();
        cfg.set("state.generator_adam_steps", std::to_string(generator_state_.step_count));
        cfg.set("state.discriminator_adam_steps", std::to_string(discriminator_state_.step_count));
        c.config_text = cfg.format();
        append(c, "generator/", generator_.params());
        append(c, "discriminator/", discriminator_.params());
        append_moments(c, "adam.generator", generator_.params(), generator_state_);
        append_moments(c, "adam.discriminator", discriminator_.params(), discriminator_state_);
        return c;
    }

    static GanTrainer from_checkpoint(const Checkpoint& c) {
        const auto cfg = KeyValueConfig::parse(c.config_text, "checkpoint config");
        GanTrainer t(TrainingConfig::from_config(cfg));
        t.epoch_ = c.epoch;
        t.generator_state_.step_count = cfg.get_u64("state.generator_adam_steps");
        t.discriminator_state_.step_count = cfg.get_u64("state.discriminator_adam_steps");
        restore(c, "generator/", t.generator_.params());
        restore(c, "discriminator/", t.discriminator_.params());
        restore_moments(c, "adam.generator", t.generator_.params(), t.generator_state_);
        restore_moments(c, "adam.discriminator", t.discriminator_.params(), t.discriminator_state_);
        return t;
    }

private:
    static void require_finite(double v, const char* what) {
        if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what);
    }

    template <typename Pred>
    static double fraction(const Tensor<T>& p, Pred pred) {
        std::size_t hits = 0;
        for (T v : p.data()) hits += pred(v);
        return static_cast<double>(hits) / static_cast<double>(p.numel());
    }

    struct Frozen {
        explicit Frozen(ModelParams<T>& p) : params(p) {
            for (auto& [name, t] : params) t.set_requires_grad(false);
        }
        ~Frozen() {
            for (auto& [name, t] : params) t.set_requires_grad(true);
        }
        Frozen(const Frozen&) = delete;
        Frozen& operator=(const Frozen&) = delete;
        ModelParams<T>& params;
    };

    static TensorRecord record(const std::string& name, const Tensor<T>& t) {
        TensorRecord r{name, t.shape(), {}};
        r.values.reserve(t.numel());
        for (T v : t.data()) r.values.push_back(static_cast<float>(v));
        return r;
    }

    static void append(Checkpoint& c, const std::string& prefix, const ModelParams<T>& params) {
        for (const auto& [name, p] : params) c.tensors.push_back(record(prefix + name, p));
    }

    static void append_moments(Checkpoint& c, const std::string& prefix, const ModelParams<T>& params,
                               const AdamState<T>& s) {
        for (std::size_t i = 0; i < params.size(); ++i)
            c.tensors.push_back(record(prefix + ".m/" + params[i].first, s.first_moment[i]));
        for (std::size_t i = 0; i < params.size(); ++i)
            c.tensors.push_back(record(prefix + ".v/" + params[i].first, s.second_moment[i]));
    }

    static void load_into(const Checkpoint& c, const std::string& name, Tensor<T>& dst) {
        const auto* r = c.find(name);
        if (!r) throw FormatError(FormatError::Kind::bad_record, "checkpoint lacks tensor '" + name + "'");
        if (r->shape != dst.shape())
            throw FormatError(FormatError::Kind::bad_record, "checkpoint tensor '" + name + "' has shape " +
                                                                 r->shape.str() + ", model expects " + dst.shape().str());
        auto out = dst.mutable_data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(r->values[i]);
    }

    static void restore(const Checkpoint& c, const std::string& prefix, ModelParams<T>& params) {
        for (auto& [name, p] : params) load_into(c, prefix + name, p);
    }

    static void restore_moments(const Checkpoint& c, const std::string& prefix, const ModelParams<T>& params,
                                AdamState<T>& s) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            load_into(c, prefix + ".m/" + params[i].first, s.first_moment[i]);
            load_into(c, prefix + ".v/" + params[i].first, s.second_moment[i]);
        }
    }

    TrainingConfig config_;
    UNetGenerator<T> generator_;
    Discriminator<T> discriminator_;
    AdamState<T> generator_state_;
    AdamState<T> discriminator_state_;
    std::size_t epoch_ = 0;
};

/// Runs epochs until `trainer.epoch() == until_epoch`, checkpointing every
/// `checkpoint_every` epochs and once more at the end.
template <typename T>
std::vector<std::filesystem::path> continue_training(GanTrainer<T>& trainer, const std::vector<TrainingSample<T>>& data,
                                                     std::size_t until_epoch, LossReport& report,
                                                     const std::optional<std::filesystem::path>& checkpoint_dir = {}) {
    std::vector<std::filesystem::path> written;
    auto write = [&] {
        if (!checkpoint_dir) return;
        auto path = *checkpoint_dir / ("epoch_" + std::to_string(trainer.epoch()) + ".ogck");
        save_checkpoint(path, trainer.checkpoint());
        written.push_back(std::move(path));
    };
    const std::size_t cadence = trainer.config().checkpoint_every;
    while (trainer.epoch() < until_epoch) {
        report.rows.push_back(trainer.run_epoch(data));
        if (cadence && trainer.epoch() % cadence == 0 && trainer.epoch() != until_epoch) write();
    }
    write();
    return written;
}

template <typename T>
struct TrainResult {
    GanTrainer<T> trainer;
    LossReport report;
    std::vector<std::filesystem::path> checkpoints;
};

template <typename T = float>
TrainResult<T> train(const std::vector<TrainingSample<T>>& data, const TrainingConfig& cfg,
                     const std::optional<std::filesystem::path>& checkpoint_dir = {}) {
    if (data.empty()) throw ArgumentError("train: empty training split");
    TrainResult<T> r{GanTrainer<T>(cfg), {}, {}};
    r.checkpoints = continue_training(r.trainer, data, cfg.epochs, r.report, checkpoint_dir);
    return r;
}

}  // namespace ogan
