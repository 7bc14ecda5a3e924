#include "vpl/pipeline.hpp"

#include "vpl/codec.hpp"
#include "vpl/error.hpp"
#include "vpl/parallel.hpp"

#include <cstdio>
#include <sstream>

namespace vpl {

std::vector<PseudoGT> pseudo_label_images(const Dataset& images, const DetectionSource& source, double tau,
                                          int jobs) {
    std::vector<std::vector<PseudoGT>> per_image(images.images.size());
    parallel_for(images.images.size(), jobs, [&](std::size_t i) {
        const ImageRecord& img = images.images[i];
        DetectionOutput out = source(img);
        if (out.imageId != img.id) {
            throw ValidationError("detector output for image " + out.imageId + " returned when asking for " + img.id);
        }
        per_image[i] = extract_pseudo_gts(out, tau, img.size(), images.categories);
    });
    std::vector<PseudoGT> all;
    for (auto& list : per_image) {
        for (auto& pg : list) all.push_back(std::move(pg));
    }
    return all;
}

PseudoByImage group_by_image(std::span<const PseudoGT> pgs) {
    PseudoByImage out;
    for (const auto& pg : pgs) out[pg.annotation.sourceImageId].push_back(pg);
    return out;
}

DetectionsByImage label_detections(const TaskView& view, const PseudoByImage& pseudo, std::optional<double> nmsIoU) {
    DetectionsByImage dets;
    for (const auto& img : view.dataset.images) {
        auto& list = dets[img.id];
        for (const auto& a : img.annotations) list.push_back({a.box, a.categoryId, 1.0});
        auto it = pseudo.find(img.id);
        if (it == pseudo.end()) continue;
        std::vector<PseudoGT> usable;
        for (const auto& pg : it->second) {
            if (pg.verification != Verification::Rejected) usable.push_back(pg);
        }
        if (nmsIoU) usable = suppress_duplicates(usable, *nmsIoU);
        for (const auto& pg : usable) {
            list.push_back({clamp_to_image(pg.annotation.box, img.size(), ClampPolicy::Clip), pg.annotation.categoryId,
                            pg.confidence});
        }
    }
    return dets;
}

Dataset restrict_truth(const Dataset& world, const TaskView& view, const std::set<CategoryId>& categories) {
    Dataset truth;
    truth.categories = world.categories;
    truth.provenance = world.provenance;
    for (const auto& img : view.dataset.images) {
        const ImageRecord* full = world.find_image(img.id);
        if (full == nullptr) throw ValidationError("view image " + img.id + " missing from ground truth");
        ImageRecord rec = *full;
        std::erase_if(rec.annotations, [&](const Annotation& a) { return !categories.contains(a.categoryId); });
        truth.images.push_back(std::move(rec));
    }
    return truth;
}

SimulationResult run_simulation(const SimulationConfig& cfg) {
    const Dataset world = generate_world(cfg.world);
    std::vector<CategoryId> universe = category_universe(world.categories, CategoryOrder::AscendingId);
    const std::string scenario_spec =
        cfg.world.scenario.empty() ? std::to_string(cfg.world.numClasses) : cfg.world.scenario;

    SimulationResult result;
    result.scenario = parse_scenario(scenario_spec, universe);
    result.imageCount = world.images.size();
    result.unfiltered.label = "Original pseudo labeling";
    result.filtered.label = "VLM-verified pseudo labeling";

    OracleBackend oracle(world, cfg.oracle);
    VerifyOptions vopts;
    vopts.policy = cfg.policy;
    vopts.jobs = cfg.jobs;
    vopts.gridW = vopts.gridH = cfg.gridSide;

    const int num_tasks = static_cast<int>(result.scenario.num_tasks());
    for (int d = 1; d <= num_tasks; ++d) {
        const TaskView view = build_task_view(world, result.scenario, d);
        const auto learned = cumulative_categories(result.scenario, d);
        const auto old_classes = cumulative_categories(result.scenario, d - 1);
        const Dataset truth = restrict_truth(world, view, learned);

        std::vector<PseudoGT> pseudo;
        if (d > 1) {
            SyntheticDetector det{old_classes, d - 1, cfg.world};
            const int staleness = d - 1;
            pseudo = pseudo_label_images(
                view.dataset,
                [&](const ImageRecord& img) { return synthetic_detect(det, *world.find_image(img.id), staleness); },
                cfg.tau, cfg.jobs);
        }

        auto record = [&](ArmSummary& arm, const std::vector<PseudoGT>& labels) {
            const auto grouped = group_by_image(labels);
            const auto dets = label_detections(view, grouped, cfg.nmsIoU);
            EvalConfig ec;
            ec.categories = learned;
            const EvalReport report = evaluate(dets, truth, ec);
            arm.meanAP50.push_back(report.meanAP50);
            arm.oldClassAP50.push_back(d > 1 ? group_mean(report, old_classes).value_or(0.0) : 0.0);
            arm.pseudoCount.push_back(labels.size());
            std::size_t kept = 0;
            for (const auto& pg : labels) kept += pg.verification != Verification::Rejected ? 1 : 0;
            arm.keptCount.push_back(kept);
        };

        record(result.unfiltered, pseudo);
        const VerifyResult verified = verify_batch(pseudo, view.dataset, oracle, vopts);
        record(result.filtered, verified.items);
    }
    return result;
}

namespace {

std::string pct(double v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%6.1f", 100.0 * v);
    return buf;
}

}  // namespace

std::string format_comparison_table(const SimulationResult& result) {
    std::ostringstream os;
    const std::size_t n = result.scenario.num_tasks();
    os << "Pseudo-labeling ablation, scenario " << result.scenario.name << " (" << result.imageCount
       << " synthetic images), mAP50 (%) of task training labels\n";
    char head[64];
    std::snprintf(head, sizeof head, "%-30s", "method");
    os << head;
    for (std::size_t t = 1; t <= n; ++t) os << "  task" << t;
    os << "\n";
    for (const ArmSummary* arm : {&result.unfiltered, &result.filtered}) {
        char label[64];
        std::snprintf(label, sizeof label, "%-30s", arm->label.c_str());
        os << label;
        for (double v : arm->meanAP50) os << " " << pct(v);
        os << "\n";
    }
    os << "kept pseudo GTs (unfiltered / verified):";
    for (std::size_t t = 0; t < n; ++t) {
        os << " " << result.unfiltered.keptCount[t] << "/" << result.filtered.keptCount[t];
    }
    os << "\n";
    return os.str();
}

std::string simulation_to_json(const SimulationResult& result) {
    ojson j;
    j["scenario"] = result.scenario.name;
    j["images"] = result.imageCount;
    for (const ArmSummary* arm : {&result.unfiltered, &result.filtered}) {
        ojson a;
        a["label"] = arm->label;
        a["meanAP50"] = arm->meanAP50;
        a["oldClassAP50"] = arm->oldClassAP50;
        a["pseudoCount"] = arm->pseudoCount;
        a["keptCount"] = arm->keptCount;
        j[arm == &result.unfiltered ? "unfiltered" : "filtered"] = a;
    }
    j["finalGap"] = result.final_filtered() - result.final_unfiltered();
    return j.dump(1) + "\n";
}

}  // namespace vpl
