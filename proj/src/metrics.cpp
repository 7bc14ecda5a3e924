#include "vpl/metrics.hpp"

#include "vpl/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

namespace vpl {

namespace {

enum class DetState : unsigned char { FalsePositive, TruePositive, Ignored };

struct AreaRange {
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    bool contains(double area) const { return area >= lo && area < hi; }
};

constexpr AreaRange kAllAreas{};
constexpr AreaRange kSmall{0.0, 32.0 * 32.0};
constexpr AreaRange kMedium{32.0 * 32.0, 96.0 * 96.0};
constexpr AreaRange kLarge{96.0 * 96.0, std::numeric_limits<double>::infinity()};

std::vector<std::size_t> rank_by_score(std::span<const ScoredDetection> dets) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
    return order;
}

// `ranked` are same-class detections in rank order; `gts` same-class boxes.
// GTs outside `range` are ignored: detections may still match them (after
// trying every in-range GT), and such matches, like unmatched detections
// outside `range`, are neither TP nor FP.
std::vector<DetState> match_class(std::span<const ScoredDetection* const> ranked, std::span<const BBox* const> gts,
                                  double iouThresh, AreaRange range, std::vector<int>* matched_gt = nullptr) {
    std::vector<bool> gt_ignored(gts.size());
    for (std::size_t g = 0; g < gts.size(); ++g) gt_ignored[g] = !range.contains(gts[g]->area());
    std::vector<bool> taken(gts.size(), false);
    std::vector<DetState> states(ranked.size(), DetState::FalsePositive);
    if (matched_gt != nullptr) matched_gt->assign(ranked.size(), -1);

    for (std::size_t d = 0; d < ranked.size(); ++d) {
        int best = -1;
        for (bool want_ignored : {false, true}) {
            double best_iou = -1.0;
            for (std::size_t g = 0; g < gts.size(); ++g) {
                if (taken[g] || gt_ignored[g] != want_ignored) continue;
                const double v = iou(ranked[d]->box, *gts[g]);
                if (v >= iouThresh && v > best_iou) {
                    best_iou = v;
                    best = static_cast<int>(g);
                }
            }
            if (best >= 0) break;
        }
        if (best >= 0) {
            taken[static_cast<std::size_t>(best)] = true;
            states[d] = gt_ignored[static_cast<std::size_t>(best)] ? DetState::Ignored : DetState::TruePositive;
            if (matched_gt != nullptr) (*matched_gt)[d] = best;
        } else if (!range.contains(ranked[d]->box.area())) {
            states[d] = DetState::Ignored;
        }
    }
    return states;
}

struct ImageData {
    const ImageRecord* image = nullptr;
    std::vector<ScoredDetection> ranked;  // rank order, truncated in COCO mode
};

struct ClassOutcome {
    std::optional<double> ap;
    std::size_t numGT = 0;
    std::vector<PrPoint> curve;
};

ClassOutcome evaluate_class(const std::vector<ImageData>& images, CategoryId cls, double iouThresh,
                            AreaRange range, Interpolation interp, bool want_curve) {
    struct Entry {
        double score;
        bool tp;
    };
    ClassOutcome out;
    std::vector<Entry> entries;
    for (const auto& im : images) {
        std::vector<const ScoredDetection*> dets;
        for (const auto& d : im.ranked) {
            if (d.categoryId == cls) dets.push_back(&d);
        }
        std::vector<const BBox*> gts;
        for (const auto& a : im.image->annotations) {
            if (a.categoryId != cls) continue;
            gts.push_back(&a.box);
            if (range.contains(a.box.area())) ++out.numGT;
        }
        auto states = match_class(dets, gts, iouThresh, range);
        for (std::size_t k = 0; k < dets.size(); ++k) {
            if (states[k] != DetState::Ignored) entries.push_back({dets[k]->score, states[k] == DetState::TruePositive});
        }
    }
    // Global ranking by score; ties keep image order (ascending id) then in-image rank.
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.score > b.score; });

    auto flags = std::make_unique<bool[]>(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) flags[i] = entries[i].tp;
    const std::span<const bool> view(flags.get(), entries.size());
    out.ap = average_precision(view, out.numGT, interp);

    if (want_curve && out.numGT > 0) {
        std::size_t tp = 0;
        for (std::size_t i = 0; i < view.size(); ++i) {
            if (view[i]) ++tp;
            out.curve.push_back({static_cast<double>(tp) / static_cast<double>(out.numGT),
                                 static_cast<double>(tp) / static_cast<double>(i + 1)});
        }
    }
    return out;
}

std::optional<double> mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return std::nullopt;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

std::string fmt(double v, int prec = 4) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

}  // namespace

MatchResult match_detections(std::span<const ScoredDetection> dets, std::span<const Annotation> gts,
                             double iouThresh) {
    MatchResult result;
    result.order = rank_by_score(dets);
    result.truePositive.assign(dets.size(), false);
    result.matchedGt.assign(dets.size(), -1);

    std::set<CategoryId> classes;
    for (const auto& d : dets) classes.insert(d.categoryId);
    for (CategoryId cls : classes) {
        std::vector<const ScoredDetection*> ranked;
        std::vector<std::size_t> slot;
        for (std::size_t k = 0; k < result.order.size(); ++k) {
            if (dets[result.order[k]].categoryId == cls) {
                ranked.push_back(&dets[result.order[k]]);
                slot.push_back(k);
            }
        }
        std::vector<const BBox*> boxes;
        std::vector<int> gt_index;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gts[g].categoryId == cls) {
                boxes.push_back(&gts[g].box);
                gt_index.push_back(static_cast<int>(g));
            }
        }
        std::vector<int> matched;
        auto states = match_class(ranked, boxes, iouThresh, kAllAreas, &matched);
        for (std::size_t k = 0; k < ranked.size(); ++k) {
            result.truePositive[slot[k]] = states[k] == DetState::TruePositive;
            if (matched[k] >= 0) result.matchedGt[slot[k]] = gt_index[static_cast<std::size_t>(matched[k])];
        }
    }
    return result;
}

std::optional<double> average_precision(std::span<const bool> truePositive, std::size_t numGT,
                                        Interpolation interpolation) {
    const std::size_t n = truePositive.size();
    if (numGT == 0) {
        if (n == 0) return std::nullopt;
        return 0.0;
    }
    std::vector<double> recall(n), precision(n);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (truePositive[i]) ++tp;
        recall[i] = static_cast<double>(tp) / static_cast<double>(numGT);
        precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    }
    // precision envelope: best precision at this rank or any later one
    for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

    if (interpolation == Interpolation::AllPoint) {
        double ap = 0.0;
        double prev_recall = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (recall[i] > prev_recall) {
                ap += (recall[i] - prev_recall) * precision[i];
                prev_recall = recall[i];
            }
        }
        return ap;
    }

    const int steps = interpolation == Interpolation::Coco101 ? 100 : 10;
    double sum = 0.0;
    for (int k = 0; k <= steps; ++k) {
        const double r = static_cast<double>(k) / static_cast<double>(steps);
        auto it = std::lower_bound(recall.begin(), recall.end(), r);
        if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
    }
    return sum / static_cast<double>(steps + 1);
}

EvalReport evaluate(const DetectionsByImage& dets, const Dataset& gt, const EvalConfig& config) {
    for (const auto& [image_id, list] : dets) {
        if (gt.find_image(image_id) == nullptr) {
            throw ValidationError("detections given for unknown image " + image_id);
        }
        for (const auto& d : list) {
            if (!gt.categories.contains(d.categoryId)) {
                throw ValidationError("detection on image " + image_id + " has unknown category " +
                                      std::to_string(d.categoryId));
            }
            if (d.box.format != BoxFormat::AbsCorner) {
                throw ValidationError("detections must use AbsCorner boxes");
            }
        }
    }

    // Images in ascending id order so the report is independent of input order.
    std::vector<const ImageRecord*> sorted;
    for (const auto& img : gt.images) sorted.push_back(&img);
    std::sort(sorted.begin(), sorted.end(), [](const ImageRecord* a, const ImageRecord* b) { return a->id < b->id; });

    std::vector<ImageData> images;
    for (const ImageRecord* img : sorted) {
        ImageData data;
        data.image = img;
        if (auto it = dets.find(img->id); it != dets.end()) {
            for (std::size_t k : rank_by_score(it->second)) data.ranked.push_back(it->second[k]);
            if (config.mode == EvalMode::Coco && data.ranked.size() > config.maxDetsPerImage) {
                data.ranked.resize(config.maxDetsPerImage);
            }
        }
        images.push_back(std::move(data));
    }

    std::vector<CategoryId> classes;
    for (const auto& c : gt.categories.entries) {
        if (!config.categories || config.categories->contains(c.id)) classes.push_back(c.id);
    }
    std::sort(classes.begin(), classes.end());

    EvalReport report;
    report.mode = config.mode;

    if (config.mode == EvalMode::Voc) {
        const Interpolation interp = config.voc11pt ? Interpolation::Voc11 : Interpolation::AllPoint;
        std::vector<double> present;
        for (CategoryId cls : classes) {
            auto res = evaluate_class(images, cls, 0.5, kAllAreas, interp, true);
            report.numGT[cls] = res.numGT;
            if (!res.ap) continue;
            report.perClassAP[cls] = *res.ap;
            report.perClassAP50[cls] = *res.ap;
            if (res.numGT > 0) {
                present.push_back(*res.ap);
                report.detail[cls] = std::move(res.curve);
            }
        }
        report.meanAP50 = mean_of(present).value_or(0.0);
        report.apByIoU[0.5] = report.meanAP50;
        return report;
    }

    constexpr int kThresholds = 10;
    std::map<CategoryId, std::vector<double>> per_class_all;
    std::vector<std::vector<double>> by_threshold(kThresholds);
    for (CategoryId cls : classes) {
        for (int k = 0; k < kThresholds; ++k) {
            const double t = static_cast<double>(50 + 5 * k) / 100.0;
            auto res = evaluate_class(images, cls, t, kAllAreas, Interpolation::Coco101, k == 0);
            report.numGT[cls] = res.numGT;
            if (!res.ap) break;
            per_class_all[cls].push_back(*res.ap);
            if (res.numGT > 0) by_threshold[static_cast<std::size_t>(k)].push_back(*res.ap);
            if (k == 0) {
                report.perClassAP50[cls] = *res.ap;
                if (res.numGT > 0) report.detail[cls] = std::move(res.curve);
            }
        }
        if (auto m = mean_of(per_class_all[cls])) report.perClassAP[cls] = *m;
    }
    std::vector<double> threshold_means;
    for (int k = 0; k < kThresholds; ++k) {
        const double t = static_cast<double>(50 + 5 * k) / 100.0;
        const double m = mean_of(by_threshold[static_cast<std::size_t>(k)]).value_or(0.0);
        report.apByIoU[t] = m;
        threshold_means.push_back(m);
    }
    report.meanAP50 = report.apByIoU.begin()->second;
    report.meanAP5095 = mean_of(threshold_means);

    auto bucket = [&](AreaRange range) -> std::optional<double> {
        std::vector<double> class_means;
        for (CategoryId cls : classes) {
            std::vector<double> aps;
            for (int k = 0; k < kThresholds; ++k) {
                const double t = static_cast<double>(50 + 5 * k) / 100.0;
                auto res = evaluate_class(images, cls, t, range, Interpolation::Coco101, false);
                if (res.numGT == 0) break;
                aps.push_back(*res.ap);
            }
            if (auto m = mean_of(aps)) class_means.push_back(*m);
        }
        return mean_of(class_means);
    };
    report.apSmall = bucket(kSmall);
    report.apMedium = bucket(kMedium);
    report.apLarge = bucket(kLarge);
    return report;
}

std::optional<double> group_mean(const EvalReport& report, const std::set<CategoryId>& group) {
    std::vector<double> xs;
    for (CategoryId c : group) {
        auto n = report.numGT.find(c);
        auto ap = report.perClassAP.find(c);
        if (n != report.numGT.end() && n->second > 0 && ap != report.perClassAP.end()) xs.push_back(ap->second);
    }
    return mean_of(xs);
}

DetectionsByImage detections_from_dataset(const Dataset& ds, double score) {
    DetectionsByImage out;
    for (const auto& img : ds.images) {
        auto& list = out[img.id];
        for (const auto& a : img.annotations) list.push_back({a.box, a.categoryId, score});
    }
    return out;
}

std::string report_to_json(const EvalReport& report, const CategoryTable& categories) {
    nlohmann::ordered_json j;
    j["mode"] = report.mode == EvalMode::Voc ? "voc" : "coco";
    j["meanAP50"] = report.meanAP50;
    j["meanAP5095"] = report.meanAP5095 ? nlohmann::ordered_json(*report.meanAP5095) : nullptr;
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
    j["apSmall"] = opt(report.apSmall);
    j["apMedium"] = opt(report.apMedium);
    j["apLarge"] = opt(report.apLarge);
    j["apByIoU"] = nlohmann::ordered_json::object();
    for (const auto& [t, v] : report.apByIoU) j["apByIoU"][fmt(t, 2)] = v;
    j["perClass"] = nlohmann::ordered_json::array();
    for (const auto& [cls, ap] : report.perClassAP) {
        const Category* c = categories.find(cls);
        j["perClass"].push_back({{"categoryId", cls},
                                 {"name", c ? c->name : std::string()},
                                 {"numGT", report.numGT.count(cls) ? report.numGT.at(cls) : 0},
                                 {"AP", ap},
                                 {"AP50", report.perClassAP50.count(cls) ? report.perClassAP50.at(cls) : 0.0}});
    }
    return j.dump(1) + "\n";
}

std::string report_table(const EvalReport& report, const CategoryTable& categories) {
    std::ostringstream os;
    os << (report.mode == EvalMode::Voc ? "VOC evaluation (AP at IoU 0.5)\n" : "COCO evaluation\n");
    os << "  class                 numGT      AP    AP50\n";
    for (const auto& [cls, ap] : report.perClassAP) {
        const Category* c = categories.find(cls);
        char line[128];
        std::snprintf(line, sizeof line, "  %-20s %6zu  %6.4f  %6.4f\n", c ? c->name.c_str() : "?",
                      report.numGT.count(cls) ? report.numGT.at(cls) : std::size_t{0}, ap,
                      report.perClassAP50.count(cls) ? report.perClassAP50.at(cls) : 0.0);
        os << line;
    }
    os << "  mAP50   " << fmt(report.meanAP50) << "\n";
    if (report.meanAP5095) {
        os << "  AP      " << fmt(*report.meanAP5095) << "\n";
        if (auto it = report.apByIoU.find(0.75); it != report.apByIoU.end()) os << "  AP75    " << fmt(it->second) << "\n";
        auto show = [&](const char* name, const std::optional<double>& v) {
            os << "  " << name << (v ? fmt(*v) : std::string("n/a")) << "\n";
        };
        show("APs     ", report.apSmall);
        show("APm     ", report.apMedium);
        show("APl     ", report.apLarge);
    }
    return os.str();
}

std::string report_csv(const EvalReport& report, const CategoryTable& categories) {
    std::ostringstream os;
    os << "category_id,name,num_gt,ap,ap50\n";
    for (const auto& [cls, ap] : report.perClassAP) {
        const Category* c = categories.find(cls);
        os << cls << "," << (c ? c->name : "") << "," << (report.numGT.count(cls) ? report.numGT.at(cls) : 0) << ","
           << fmt(ap, 6) << "," << fmt(report.perClassAP50.count(cls) ? report.perClassAP50.at(cls) : 0.0, 6) << "\n";
    }
    return os.str();
}

}  // namespace vpl
