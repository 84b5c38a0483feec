#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "image.hpp"
#include "occlusion.hpp"
#include "rng.hpp"
#include "scene.hpp"

namespace ogan {

enum class SplitTag { unassigned, train, test };

inline std::string to_string(SplitTag t) {
    switch (t) {
    case SplitTag::train: return "train";
    case SplitTag::test: return "test";
    default: return "unassigned";
    }
}

inline SplitTag parse_split_tag(const std::string& s) {
    if (s == "train") return SplitTag::train;
    if (s == "test") return SplitTag::test;
    if (s == "unassigned") return SplitTag::unassigned;
    throw FormatError(FormatError::Kind::bad_record, "unknown split tag '" + s + "'");
}

/// One manifest line. Paths are relative to the manifest's directory;
/// "-" marks a file that has not been produced yet.
struct PairRecord {
    std::string id;
    std::string x_path = "-";
    std::string y_path = "-";
    std::string mask_path = "-";
    std::uint64_t scene_seed = 0;
    std::uint64_t occlusion_seed = 0;
    SplitTag split = SplitTag::unassigned;

    friend bool operator==(const PairRecord&, const PairRecord&) = default;
};

struct CorpusManifest {
    std::vector<PairRecord> records;

    std::size_t count(SplitTag tag) const {
        return static_cast<std::size_t>(
            std::count_if(records.begin(), records.end(), [tag](const PairRecord& r) { return r.split == tag; }));
    }

    std::vector<PairRecord> select(SplitTag tag) const {
        std::vector<PairRecord> out;
        std::copy_if(records.begin(), records.end(), std::back_inserter(out),
                     [tag](const PairRecord& r) { return r.split == tag; });
        return out;
    }
};

// Tab-separated: id, x, y, mask, scene seed, occlusion seed, split.
inline std::string format_manifest(const CorpusManifest& m) {
    std::ostringstream os;
    for (const auto& r : m.records)
        os << r.id << '\t' << r.x_path << '\t' << r.y_path << '\t' << r.mask_path << '\t' << r.scene_seed << '\t'
           << r.occlusion_seed << '\t' << to_string(r.split) << '\n';
    return os.str();
}

inline CorpusManifest parse_manifest(const std::string& text, const std::string& origin = "manifest") {
    CorpusManifest m;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t start = 0;
        for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1)
            f.push_back(line.substr(start, tab - start));
        f.push_back(line.substr(start));
        const std::string where = origin + ":" + std::to_string(lineno);
        if (f.size() != 7)
            throw FormatError(FormatError::Kind::bad_record,
                              where + ": expected 7 tab-separated fields, got " + std::to_string(f.size()));
        PairRecord r;
        r.id = f[0];
        r.x_path = f[1];
        r.y_path = f[2];
        r.mask_path = f[3];
        try {
            std::size_t used = 0;
            r.scene_seed = std::stoull(f[4], &used);
            if (used != f[4].size()) throw std::invalid_argument("trailing");
            r.occlusion_seed = std::stoull(f[5], &used);
            if (used != f[5].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw FormatError(FormatError::Kind::bad_record, where + ": seeds must be unsigned integers");
        }
        try {
            r.split = parse_split_tag(f[6]);
        } catch (const FormatError& e) {
            throw FormatError(FormatError::Kind::bad_record, where + ": " + e.what());
        }
        m.records.push_back(std::move(r));
    }
    return m;
}

inline void save_manifest(const std::filesystem::path& path, const CorpusManifest& m) {
    const auto text = format_manifest(m);
    write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

inline CorpusManifest load_manifest(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return parse_manifest(std::string(bytes.begin(), bytes.end()), path.string());
}

/// Tags exactly round(train_fraction * N) records as train via a seeded
/// shuffle, the rest as test.
inline CorpusManifest split_corpus(CorpusManifest manifest, double train_fraction, std::uint64_t seed) {
    if (manifest.records.empty()) throw ArgumentError("split_corpus: empty manifest");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ArgumentError("split_corpus: train fraction must lie in (0, 1)");
    const std::size_t n = manifest.records.size();
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, 0x73706c6974ULL));
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    for (std::size_t k = 0; k < n; ++k) manifest.records[order[k]].split = k < n_train ? SplitTag::train : SplitTag::test;
    return manifest;
}

/// Scene seeds are base_seed + i, so base 0 renders seeds 0..N-1.
inline std::uint64_t scene_seed_for(std::uint64_t base_seed, std::size_t index) { return base_seed + index; }

inline std::uint64_t occlusion_seed_for(std::uint64_t base_seed, std::size_t index) {
    return derive_seed(base_seed, 0x6f63636cULL, index);
}

inline std::string pair_id(std::size_t index) {
    std::string digits = std::to_string(index);
    return "pair_" + std::string(digits.size() < 4 ? 4 - digits.size() : 0, '0') + digits;
}

/// Renders N scenes into `dir` and returns their manifest (no occlusions yet).
inline CorpusManifest generate_corpus(const std::filesystem::path& dir, std::size_t count, std::uint64_t base_seed,
                                      const SceneParams& params) {
    if (count == 0) throw ArgumentError("generate_corpus: count must be positive");
    CorpusManifest m;
    for (std::size_t i = 0; i < count; ++i) {
        PairRecord r;
        r.id = pair_id(i);
        r.scene_seed = scene_seed_for(base_seed, i);
        r.occlusion_seed = occlusion_seed_for(base_seed, i);
        r.y_path = "images/" + r.id + "_y.ppm";
        save_image(dir / r.y_path, generate_scene(params, r.scene_seed));
        m.records.push_back(std::move(r));
    }
    return m;
}

/// Writes x and mask files for every record, replacing earlier ones.
inline CorpusManifest occlude_corpus(const std::filesystem::path& dir, CorpusManifest m, const OcclusionConfig& cfg) {
    for (auto& r : m.records) {
        if (r.y_path == "-") throw ArgumentError("occlude: record " + r.id + " has no ground-truth image");
        const Image y = load_image(dir / r.y_path);
        const ImagePair pair = synthesize_occlusion(y, cfg, r.occlusion_seed);
        r.x_path = "images/" + r.id + "_x.ppm";
        r.mask_path = "images/" + r.id + "_mask.pgm";
        save_image(dir / r.x_path, pair.x);
        save_image(dir / r.mask_path, pair.mask);
    }
    return m;
}

struct LabeledPair {
    std::string id;
    ImagePair pair;
};

inline std::vector<LabeledPair> load_pairs(const std::filesystem::path& dir, const CorpusManifest& m, SplitTag tag) {
    std::vector<LabeledPair> out;
    for (const auto& r : m.records) {
        if (r.split != tag) continue;
        if (r.x_path == "-" || r.mask_path == "-")
            throw ArgumentError("record " + r.id + " has no occluded input; run occlusion first");
        LabeledPair lp{r.id, {load_image(dir / r.x_path), load_image(dir / r.y_path), load_image(dir / r.mask_path),
                              r.scene_seed, r.occlusion_seed}};
        if (lp.pair.mask.channels != 1 || !lp.pair.mask.same_extent(lp.pair.y) || !lp.pair.x.same_extent(lp.pair.y))
            throw FormatError(FormatError::Kind::bad_record, "record " + r.id + ": image extents disagree");
        out.push_back(std::move(lp));
    }
    return out;
}

/// In-memory corpus: scenes from seeds base..base+N-1 with their occlusions.
inline std::vector<LabeledPair> make_pairs(std::size_t count, std::uint64_t base_seed, const SceneParams& params,
                                           const OcclusionConfig& cfg) {
    std::vector<LabeledPair> out;
    for (std::size_t i = 0; i < count; ++i) {
        auto pair = synthesize_occlusion(generate_scene(params, scene_seed_for(base_seed, i)), cfg,
                                         occlusion_seed_for(base_seed, i));
        pair.scene_seed = scene_seed_for(base_seed, i);
        out.push_back({pair_id(i), std::move(pair)});
    }
    return out;
}

}  // namespace ogan
