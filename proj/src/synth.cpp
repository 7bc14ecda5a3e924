#include "vpl/synth.hpp"

#include "vpl/error.hpp"
#include "vpl/rng.hpp"
#include "vpl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace vpl {

namespace {

constexpr int kMaxPlacementAttempts = 500;
constexpr double kMaxPairIoU = 0.3;

std::string class_name(int id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "class_%02d", id);
    return buf;
}

std::string image_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "synth_%05zu", index);
    return buf;
}

BBox random_box(SeededRng& rng, ImageSize size) {
    const double W = size.width;
    const double H = size.height;
    const double w = std::round(rng.uniform(0.10, 0.35) * W);
    const double h = std::round(rng.uniform(0.10, 0.35) * H);
    const double x = std::round(rng.uniform(0.0, W - w));
    const double y = std::round(rng.uniform(0.0, H - h));
    return BBox::abs_corner(x, y, x + w, y + h);
}

BBox jitter_box(const BBox& box, double sigma, ImageSize size, SeededRng& rng) {
    if (sigma <= 0.0) return box;
    BBox j = BBox::abs_corner(box.x1() + sigma * rng.normal(), box.y1() + sigma * rng.normal(),
                              box.x2() + sigma * rng.normal(), box.y2() + sigma * rng.normal());
    j.v[0] = std::clamp(j.v[0], 0.0, static_cast<double>(size.width));
    j.v[2] = std::clamp(j.v[2], 0.0, static_cast<double>(size.width));
    j.v[1] = std::clamp(j.v[1], 0.0, static_cast<double>(size.height));
    j.v[3] = std::clamp(j.v[3], 0.0, static_cast<double>(size.height));
    if (!(j.x2() - j.x1() >= 1.0) || !(j.y2() - j.y1() >= 1.0)) return box;
    return j;
}

void check_probability(double p, const char* name, bool allow_one = true) {
    if (!(p >= 0.0 && (allow_one ? p <= 1.0 : p < 1.0))) {
        throw ValidationError(std::string(name) + " must lie in [0,1" + (allow_one ? "]" : ")"));
    }
}

}  // namespace

void validate_config(const SynthWorldConfig& cfg) {
    if (cfg.numClasses < 1) throw ValidationError("numClasses must be >= 1");
    if (cfg.imagesPerTask < 1) throw ValidationError("imagesPerTask must be >= 1");
    if (cfg.objectsPerImage < 1) throw ValidationError("objectsPerImage must be >= 1 (images need annotations)");
    if (cfg.imageSize.width < 16 || cfg.imageSize.height < 16) throw ValidationError("image size must be >= 16x16");
    const auto& d = cfg.detector;
    check_probability(d.recallDecay, "recallDecay");
    check_probability(d.hallucinationRate, "hallucinationRate", false);
    if (!(d.boxJitter >= 0.0)) throw ValidationError("boxJitter must be >= 0");
    if (!(d.scoreNoise >= 0.0)) throw ValidationError("scoreNoise must be >= 0");
    if (!(d.stalenessPenalty >= 0.0)) throw ValidationError("stalenessPenalty must be >= 0");
    check_probability(d.hallucinationScoreMin, "hallucinationScoreMin");
    check_probability(d.hallucinationScoreMax, "hallucinationScoreMax");
    if (d.hallucinationScoreMin > d.hallucinationScoreMax) {
        throw ValidationError("hallucination score range is empty");
    }
    if (d.numQueries < 1) throw ValidationError("numQueries must be >= 1");
}

Dataset generate_world(const SynthWorldConfig& cfg) {
    validate_config(cfg);
    Dataset ds;
    ds.provenance = Provenance::Synthetic;
    std::vector<CategoryId> universe;
    for (int c = 1; c <= cfg.numClasses; ++c) {
        ds.categories.entries.push_back({c, class_name(c)});
        universe.push_back(c);
    }

    std::vector<std::vector<CategoryId>> groups;
    if (!cfg.scenario.empty()) groups = parse_scenario(cfg.scenario, universe).taskCategorySets;
    const std::size_t num_groups = std::max<std::size_t>(1, groups.size());
    const std::size_t total = num_groups * static_cast<std::size_t>(cfg.imagesPerTask);

    for (std::size_t i = 0; i < total; ++i) {
        SeededRng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
        ImageRecord img;
        img.id = image_name(i);
        img.filePathOrUri = "synth/" + img.id + ".png";
        img.width = cfg.imageSize.width;
        img.height = cfg.imageSize.height;

        for (int k = 0; k < cfg.objectsPerImage; ++k) {
            CategoryId cls;
            if (k == 0 && !groups.empty()) {
                const auto& group = groups[i / static_cast<std::size_t>(cfg.imagesPerTask)];
                cls = group[rng.index(group.size())];
            } else {
                cls = universe[rng.index(universe.size())];
            }
            bool placed = false;
            for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
                const BBox box = random_box(rng, img.size());
                const bool clear = std::all_of(img.annotations.begin(), img.annotations.end(),
                                               [&](const Annotation& a) { return iou(a.box, box) < kMaxPairIoU; });
                if (clear) {
                    img.annotations.push_back({cls, class_name(cls), box, img.id, false});
                    placed = true;
                }
            }
            if (!placed) {
                throw ValidationError("could not place " + std::to_string(cfg.objectsPerImage) +
                                      " non-overlapping objects in image " + img.id);
            }
        }
        ds.images.push_back(std::move(img));
    }
    return ds;
}

DetectionOutput synthetic_detect(const SyntheticDetector& det, const ImageRecord& image, int staleness) {
    if (staleness < 0) throw ValidationError("staleness must be >= 0");
    if (det.knownCategories.empty()) throw ValidationError("synthetic detector knows no categories");
    const auto& cfg = det.config;
    const auto& em = cfg.detector;
    const ImageSize size = image.size();

    const std::uint64_t base =
        derive_seed(derive_seed(cfg.seed, image.id), static_cast<std::uint64_t>(det.trainedAtTask) * 1009u +
                                                         static_cast<std::uint64_t>(staleness));
    SeededRng emit_rng(derive_seed(base, std::uint64_t{1}));
    SeededRng hall_rng(derive_seed(base, std::uint64_t{2}));
    SeededRng fill_rng(derive_seed(base, std::uint64_t{3}));

    DetectionOutput out;
    out.imageId = image.id;
    out.scoresAreLogits = false;
    out.categoryIds.assign(det.knownCategories.begin(), det.knownCategories.end());
    const std::size_t num_fg = out.categoryIds.size();
    auto column_of = [&](CategoryId id) {
        return static_cast<std::size_t>(
            std::find(out.categoryIds.begin(), out.categoryIds.end(), id) - out.categoryIds.begin());
    };

    std::vector<std::vector<double>> rows;
    std::vector<BBox> boxes;
    auto push_row = [&](std::size_t column, double score, const BBox& box, SeededRng& rng) {
        std::vector<double> row(num_fg + 1);
        for (std::size_t c = 0; c < num_fg; ++c) row[c] = rng.uniform(0.0, 0.05);
        row[column] = score;
        row[num_fg] = std::clamp(1.0 - score, 0.0, 1.0);
        rows.push_back(std::move(row));
        boxes.push_back(box);
    };

    const double keep_prob = std::pow(1.0 - em.recallDecay, staleness);
    for (const auto& obj : image.annotations) {
        if (!det.knownCategories.contains(obj.categoryId)) continue;
        if (!emit_rng.bernoulli(keep_prob)) continue;
        double score = emit_rng.uniform(0.6, 0.95) - em.stalenessPenalty * staleness;
        if (em.scoreNoise > 0.0) score += em.scoreNoise * emit_rng.normal();
        score = std::clamp(score, 0.01, 0.99);
        push_row(column_of(obj.categoryId), score, jitter_box(obj.box, em.boxJitter, size, emit_rng), emit_rng);
    }

    if (staleness > 0) {
        const double p = std::min(1.0, em.hallucinationRate * staleness);
        for (CategoryId cls : det.knownCategories) {
            if (!hall_rng.bernoulli(p)) continue;
            std::vector<const Annotation*> others;
            for (const auto& a : image.annotations) {
                if (a.categoryId != cls) others.push_back(&a);
            }
            BBox box = others.empty() ? random_box(hall_rng, size)
                                      : jitter_box(others[hall_rng.index(others.size())]->box, em.boxJitter, size,
                                                   hall_rng);
            const double score = hall_rng.uniform(em.hallucinationScoreMin, em.hallucinationScoreMax);
            push_row(column_of(cls), score, box, hall_rng);
        }
    }

    const std::size_t num_queries = std::max(rows.size(), static_cast<std::size_t>(em.numQueries));
    while (rows.size() < num_queries) {
        std::vector<double> row(num_fg + 1);
        for (std::size_t c = 0; c < num_fg; ++c) row[c] = fill_rng.uniform(0.0, 0.1);
        row[num_fg] = fill_rng.uniform(0.8, 1.0);
        rows.push_back(std::move(row));
        boxes.push_back(random_box(fill_rng, size));
    }

    std::vector<double> flat;
    flat.reserve(num_queries * (num_fg + 1));
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    out.scores = ScoreMatrix(num_queries, num_fg + 1, std::move(flat));
    for (const auto& b : boxes) {
        const BBox n = convert_box(b, BoxFormat::NormCenter, size, ClampPolicy::Clip);
        out.boxes.push_back(n.v);
    }
    return out;
}

}  // namespace vpl
