#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ogan/ogan.hpp"

namespace ogan::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
    kOk = 0,
    kArgumentFailure = 1,
    kIoFailure = 2,
    kNumericFailure = 3,
    kCheckFailure = 4,
};

inline int exit_code_for(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::argument: return kArgumentFailure;
    case ErrorCategory::io: return kIoFailure;
    case ErrorCategory::numeric: return kNumericFailure;
    }
    return kArgumentFailure;
}

/// Every key the CLI understands, with its built-in value.
inline KeyValueConfig default_run_config() {
    KeyValueConfig c = TrainingConfig{}.to_config();
    const OcclusionConfig occ;
    const auto d = KeyValueConfig::format_double;
    c.set("corpus.count", "100");
    c.set("scene.size", std::to_string(SceneParams{}.size));
    c.set("occlusion.shapes", "rectangle,ellipse");
    c.set("occlusion.count_lo", std::to_string(occ.count_lo));
    c.set("occlusion.count_hi", std::to_string(occ.count_hi));
    c.set("occlusion.coverage_lo", d(occ.coverage_lo));
    c.set("occlusion.coverage_hi", d(occ.coverage_hi));
    c.set("occlusion.fill", std::to_string(occ.fill));
    c.set("occlusion.max_attempts", std::to_string(occ.max_attempts));
    c.set("split.fraction", "0.8");
    c.set("overlay.alpha", "1");
    c.set("overlay.full_frame", "false");
    c.set("overlay.latency_reps", "30");
    c.set("eval.threshold", d(kDefaultErrorThreshold));
    c.set("eval.grids", "true");
    return c;
}

/// Defaults, then the config file, then command-line overrides.
inline KeyValueConfig resolve_config(const std::optional<fs::path>& file, const KeyValueConfig& overrides) {
    KeyValueConfig resolved = default_run_config();
    if (file) {
        const auto bytes = read_file_bytes(*file);
        const auto doc = KeyValueConfig::parse(std::string(bytes.begin(), bytes.end()), file->string());
        doc.require_known(resolved);
        for (const auto& [k, v] : doc.entries()) resolved.set(k, v);
    }
    overrides.require_known(resolved);
    for (const auto& [k, v] : overrides.entries()) resolved.set(k, v);
    return resolved;
}

inline SceneParams scene_params(const KeyValueConfig& c) {
    SceneParams p;
    p.size = c.get_u64("scene.size");
    p.validate();
    return p;
}

inline OcclusionConfig occlusion_config(const KeyValueConfig& c) {
    OcclusionConfig o;
    const auto& shapes = c.get("occlusion.shapes");
    o.rectangles = o.ellipses = false;
    std::istringstream in(shapes);
    for (std::string s; std::getline(in, s, ',');) {
        if (s == "rectangle") o.rectangles = true;
        else if (s == "ellipse") o.ellipses = true;
        else throw ArgumentError("occlusion.shapes: unknown shape '" + s + "'");
    }
    o.count_lo = c.get_u64("occlusion.count_lo");
    o.count_hi = c.get_u64("occlusion.count_hi");
    o.coverage_lo = c.get_double("occlusion.coverage_lo");
    o.coverage_hi = c.get_double("occlusion.coverage_hi");
    const auto fill = c.get_u64("occlusion.fill");
    if (fill > 255) throw ArgumentError("occlusion.fill must lie in [0, 255]");
    o.fill = static_cast<std::uint8_t>(fill);
    o.max_attempts = c.get_u64("occlusion.max_attempts");
    o.validate();
    return o;
}

/// Highest-epoch checkpoint under `<dir>/checkpoints`.
inline fs::path latest_checkpoint(const fs::path& dir) {
    const auto ckdir = dir / "checkpoints";
    std::optional<std::pair<std::uint64_t, fs::path>> best;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(ckdir, ec)) {
        const auto name = entry.path().filename().string();
        if (!name.starts_with("epoch_") || entry.path().extension() != ".ogck") continue;
        const auto digits = name.substr(6, name.size() - 6 - 5);
        std::uint64_t k = 0;
        try {
            k = KeyValueConfig::parse_number<std::uint64_t>("checkpoint", digits);
        } catch (const ArgumentError&) {
            continue;
        }
        if (!best || k > best->first) best = {k, entry.path()};
    }
    if (!best) throw IoError("no checkpoint found under " + ckdir.string() + "; pass --checkpoint or run train");
    return best->second;
}

struct Options {
    std::optional<fs::path> config_file;
    fs::path out = "ogan_run";
    std::optional<fs::path> corpus;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> count;
    std::optional<std::uint64_t> size;
    std::optional<double> fraction;
    std::optional<std::uint64_t> epochs;
    std::optional<fs::path> resume;
    std::optional<fs::path> checkpoint;
    std::optional<fs::path> input;
    std::optional<fs::path> mask;
    std::optional<double> alpha;
    bool full_frame = false;
    std::optional<std::uint64_t> latency_reps;
    std::optional<double> threshold;
    bool no_grids = false;

    fs::path corpus_dir() const { return corpus ? *corpus : out; }

    KeyValueConfig overrides() const {
        KeyValueConfig o;
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos || eq == 0) throw ArgumentError("--set expects key=value, got '" + s + "'");
            o.set(s.substr(0, eq), s.substr(eq + 1));
        }
        const auto d = KeyValueConfig::format_double;
        if (seed) o.set("seed", std::to_string(*seed));
        if (count) o.set("corpus.count", std::to_string(*count));
        if (size) o.set("scene.size", std::to_string(*size));
        if (fraction) o.set("split.fraction", d(*fraction));
        if (epochs) o.set("train.epochs", std::to_string(*epochs));
        if (alpha) o.set("overlay.alpha", d(*alpha));
        if (full_frame) o.set("overlay.full_frame", "true");
        if (latency_reps) o.set("overlay.latency_reps", std::to_string(*latency_reps));
        if (threshold) o.set("eval.threshold", d(*threshold));
        if (no_grids) o.set("eval.grids", "false");
        return o;
    }
};

class Runner {
public:
    Runner(Options opts, std::ostream& out) : opts_(std::move(opts)), out_(out) {
        config_ = resolve_config(opts_.config_file, opts_.overrides());
        const auto text = config_.format();
        write_file_bytes(opts_.out / "resolved_config.txt", std::vector<std::uint8_t>(text.begin(), text.end()));
    }

    int gen_corpus() {
        const auto n = config_.get_u64("corpus.count");
        const auto m = generate_corpus(opts_.out, n, config_.get_u64("seed"), scene_params(config_));
        save_manifest(opts_.out / "manifest.tsv", m);
        out_ << "generated " << m.records.size() << " scenes in " << opts_.out.string() << "\n";
        return kOk;
    }

    int occlude() {
        auto m = load_manifest(opts_.corpus_dir() / "manifest.tsv");
        m = occlude_corpus(opts_.corpus_dir(), std::move(m), occlusion_config(config_));
        save_manifest(opts_.out / "manifest.tsv", m);
        out_ << "occluded " << m.records.size() << " scenes\n";
        return kOk;
    }

    int split() {
        auto m = load_manifest(opts_.corpus_dir() / "manifest.tsv");
        m = split_corpus(std::move(m), config_.get_double("split.fraction"), config_.get_u64("seed"));
        save_manifest(opts_.out / "manifest.tsv", m);
        out_ << "train " << m.count(SplitTag::train) << " test " << m.count(SplitTag::test) << "\n";
        return kOk;
    }

    int train() {
        const auto pairs = load_split(SplitTag::train);
        std::vector<TrainingSample<float>> data;
        for (const auto& p : pairs) data.push_back(to_sample<float>(p.pair));
        if (data.empty()) throw ArgumentError("train: the manifest has no train rows; run split first");
        const auto cfg = TrainingConfig::from_config(config_);
        GanTrainer<float> trainer = opts_.resume ? GanTrainer<float>::from_checkpoint(load_checkpoint(*opts_.resume))
                                                 : GanTrainer<float>(cfg);
        if (opts_.resume && trainer.epoch() > cfg.epochs)
            throw ArgumentError("train: checkpoint epoch " + std::to_string(trainer.epoch()) + " is past train.epochs");
        LossReport report;
        const auto written = continue_training(trainer, data, cfg.epochs, report, opts_.out / "checkpoints");
        const auto tsv = report.to_tsv();
        write_file_bytes(opts_.out / "loss_report.tsv", std::vector<std::uint8_t>(tsv.begin(), tsv.end()));
        out_ << tsv;
        out_ << "checkpoint " << written.back().string() << "\n";
        return kOk;
    }

    int infer() {
        const auto gen = load_generator();
        const auto dir = opts_.out / "infer";
        if (opts_.input) {
            const auto x = image_to_tensor<float>(load_image(*opts_.input));
            const auto path = dir / (opts_.input->stem().string() + "_recon.ppm");
            save_image(path, tensor_to_image(reconstruct(gen, x)));
            out_ << path.string() << "\n";
            return kOk;
        }
        const auto pairs = load_split(SplitTag::test);
        for (const auto& p : pairs)
            save_image(dir / (p.id + "_recon.ppm"), tensor_to_image(reconstruct(gen, image_to_tensor<float>(p.pair.x))));
        out_ << "reconstructed " << pairs.size() << " test images\n";
        return kOk;
    }

    int overlay() {
        const auto gen = load_generator();
        const double alpha = config_.get_double("overlay.alpha");
        const auto region = config_.get_bool("overlay.full_frame") ? BlendRegion::full_frame : BlendRegion::masked;
        std::vector<std::pair<std::string, std::pair<Image, Image>>> items;
        if (opts_.input) {
            if (!opts_.mask) throw ArgumentError("overlay: --input needs --mask marking the occluded region");
            items.push_back({opts_.input->stem().string(), {load_image(*opts_.input), load_image(*opts_.mask)}});
        } else {
            for (auto& p : load_split(SplitTag::test)) items.push_back({p.id, {p.pair.x, p.pair.mask}});
        }
        if (items.empty()) throw ArgumentError("overlay: no test rows in the manifest");
        for (const auto& [id, im] : items) {
            const auto& [x, mask] = im;
            const Image recon = tensor_to_image(reconstruct(gen, image_to_tensor<float>(x)));
            save_image(opts_.out / "overlays" / (id + "_overlay.ppm"), composite_overlay(x, recon, mask, alpha, region));
        }
        out_ << "wrote " << items.size() << " overlays\n";
        if (const auto reps = config_.get_u64("overlay.latency_reps"); reps > 0) {
            const auto& [x, mask] = items.front().second;
            const auto summary = measure_latency(gen, image_to_tensor<float>(x), mask_to_tensor<float>(mask), reps, alpha);
            const auto text = summary.to_text();
            write_file_bytes(opts_.out / "overlays" / "latency.tsv", std::vector<std::uint8_t>(text.begin(), text.end()));
            out_ << text;
        }
        return kOk;
    }

    int eval() {
        const auto gen = load_generator();
        const auto pairs = load_split(SplitTag::test);
        std::optional<fs::path> grids;
        if (config_.get_bool("eval.grids")) grids = opts_.out / "eval" / "grids";
        const auto report = evaluate(pairs, [&](const Tensor<float>& x) { return reconstruct(gen, x); }, grids);
        const auto tsv = report.to_tsv();
        write_file_bytes(opts_.out / "eval" / "report.tsv", std::vector<std::uint8_t>(tsv.begin(), tsv.end()));
        const double threshold = config_.get_double("eval.threshold");
        std::ostringstream summary;
        const auto d = KeyValueConfig::format_double;
        summary << "pairs\t" << report.rows.size() << "\n"
                << "mean_masked_l1\t" << d(report.mean_masked_l1()) << "\n"
                << "median_masked_l1\t" << d(report.median_masked_l1()) << "\n"
                << "mean_baseline_l1\t" << d(report.mean_baseline_l1()) << "\n"
                << "median_baseline_l1\t" << d(report.median_baseline_l1()) << "\n"
                << "error_rate\t" << d(error_rate(report, threshold)) << "\n";
        const auto s = summary.str();
        write_file_bytes(opts_.out / "eval" / "summary.tsv", std::vector<std::uint8_t>(s.begin(), s.end()));
        out_ << s;
        return kOk;
    }

    int gradcheck() {
        bool ok = true;
        for (const auto& r : run_gradcheck_suite(config_.get_u64("seed"))) {
            out_ << std::left << std::setw(24) << r.name << std::scientific << std::setprecision(3) << r.max_relative_error
                 << std::defaultfloat << (r.passed ? "  ok" : "  FAIL") << "\n";
            ok = ok && r.passed;
        }
        return ok ? kOk : kCheckFailure;
    }

private:
    std::vector<LabeledPair> load_split(SplitTag tag) const {
        const auto dir = opts_.corpus_dir();
        return load_pairs(dir, load_manifest(dir / "manifest.tsv"), tag);
    }

    UNetGenerator<float> load_generator() const {
        const auto path = opts_.checkpoint ? *opts_.checkpoint : latest_checkpoint(opts_.out);
        return GanTrainer<float>::from_checkpoint(load_checkpoint(path)).generator();
    }

    Options opts_;
    std::ostream& out_;
    KeyValueConfig config_;
};

/// Parses `args` (without the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Occluded-object reconstruction with a conditional GAN", "ogan"};
    app.require_subcommand(1);
    Options o;

    auto common = [&o](CLI::App* sub) {
        sub->add_option("--config", o.config_file, "Config file of key = value lines");
        sub->add_option("--out", o.out, "Output directory")->capture_default_str();
        sub->add_option("--seed", o.seed, "Seed (config key: seed)");
        sub->add_option("--set", o.sets, "Override any config key, as key=value");
    };
    auto corpus = [&o](CLI::App* sub) {
        sub->add_option("--corpus", o.corpus, "Corpus directory holding manifest.tsv (default: --out)");
    };
    auto model = [&o](CLI::App* sub) {
        sub->add_option("--checkpoint", o.checkpoint, "Checkpoint (default: latest under <out>/checkpoints)");
    };

    auto* gen = app.add_subcommand("gen-corpus", "Render ground-truth scenes and a manifest");
    common(gen);
    gen->add_option("--count", o.count, "Number of scenes (corpus.count)");
    gen->add_option("--size", o.size, "Scene side in pixels (scene.size)");

    auto* occ = app.add_subcommand("occlude", "Add synthetic occluders to every scene");
    common(occ);
    corpus(occ);

    auto* spl = app.add_subcommand("split", "Tag manifest rows as train or test");
    common(spl);
    corpus(spl);
    spl->add_option("--fraction", o.fraction, "Train fraction (split.fraction)");

    auto* trn = app.add_subcommand("train", "Train the generator and discriminator on the train split");
    common(trn);
    corpus(trn);
    trn->add_option("--epochs", o.epochs, "Total epochs (train.epochs)");
    trn->add_option("--resume", o.resume, "Continue from a checkpoint");

    auto* inf = app.add_subcommand("infer", "Reconstruct occluded test images");
    common(inf);
    corpus(inf);
    model(inf);
    inf->add_option("--input", o.input, "Single occluded image instead of the test split");

    auto* ovl = app.add_subcommand("overlay", "Composite reconstructions onto the occluded inputs");
    common(ovl);
    corpus(ovl);
    model(ovl);
    ovl->add_option("--input", o.input, "Single occluded image instead of the test split");
    ovl->add_option("--mask", o.mask, "Mask for --input (nonzero = occluded)");
    ovl->add_option("--alpha", o.alpha, "Blend weight of the reconstruction (overlay.alpha)");
    ovl->add_flag("--full-frame", o.full_frame, "Blend everywhere, not only inside the mask");
    ovl->add_option("--latency-reps", o.latency_reps, "Timed repetitions, 0 to skip (overlay.latency_reps)");

    auto* evl = app.add_subcommand("eval", "Score reconstructions of the test split");
    common(evl);
    corpus(evl);
    model(evl);
    evl->add_option("--threshold", o.threshold, "Masked L1 above which a pair counts as wrong (eval.threshold)");
    evl->add_flag("--no-grids", o.no_grids, "Skip the input | reconstruction | truth images");

    auto* grd = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
    common(grd);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error[argument]: " << e.what() << "\n";
        return kArgumentFailure;
    }

    try {
        Runner runner(o, out);
        if (gen->parsed()) return runner.gen_corpus();
        if (occ->parsed()) return runner.occlude();
        if (spl->parsed()) return runner.split();
        if (trn->parsed()) return runner.train();
        if (inf->parsed()) return runner.infer();
        if (ovl->parsed()) return runner.overlay();
        if (evl->parsed()) return runner.eval();
        return runner.gradcheck();
    } catch (const Error& e) {
        err << "error[" << category_name(e.category()) << "]: " << e.what() << "\n";
        return exit_code_for(e.category());
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error[io]: " << e.what() << "\n";
        return kIoFailure;
    }
}

}  // namespace ogan::cli
