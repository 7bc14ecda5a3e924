#include "cli.hpp"

#include "vpl/codec.hpp"
#include "vpl/conformance.hpp"
#include "vpl/error.hpp"
#include "vpl/http_backend.hpp"
#include "vpl/ingest.hpp"
#include "vpl/manifest.hpp"
#include "vpl/merge.hpp"
#include "vpl/metrics.hpp"
#include "vpl/parallel.hpp"
#include "vpl/pipeline.hpp"
#include "vpl/rng.hpp"
#include "vpl/scenario.hpp"
#include "vpl/synth.hpp"
#include "vpl/verify.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#ifndef VPL_PROTOCOL_DIR
#define VPL_PROTOCOL_DIR "protocol"
#endif

namespace vpl::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Re-throws library errors with the offending file prepended, keeping
/// the error category (and thus the exit code).
template <typename Fn>
auto with_file_context(const fs::path& path, Fn&& fn) -> decltype(fn()) {
    const std::string where = path.string() + ": ";
    try {
        return fn();
    } catch (const ProtocolError& e) {
        throw ProtocolError(where + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(where + e.what());
    } catch (const ParseError& e) {
        throw ParseError(where + e.what());
    }
}

std::string env_name(const std::string& option) {
    std::string out = "VPL_";
    for (char c : option) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

/// Options of one subcommand, resolved with the precedence
/// command line > environment > config file > default. Every resolved
/// value except those read with record=false ends up in the run manifest.
class Settings {
public:
    Settings(CLI::App* app, std::string section) : app_(app), section_(std::move(section)) {
        app_->add_option("--config", configPath_, "JSON config file; keys are option names, optionally nested "
                                                  "under the subcommand name");
    }

    void option(const std::string& name, const std::string& help) {
        opts_[name] = app_->add_option("--" + name, values_[name], help);
    }
    void flag(const std::string& name, const std::string& help) {
        flags_[name] = false;
        opts_[name] = app_->add_flag("--" + name, flags_[name], help);
    }

    void load_config() {
        if (configPath_.empty()) return;
        const std::string bytes = read_file(configPath_);
        try {
            config_ = json::parse(bytes);
        } catch (const json::exception& e) {
            throw ParseError(configPath_ + ": malformed config: " + e.what());
        }
        if (!config_.is_object()) throw ParseError(configPath_ + ": config must be a JSON object");
    }

    std::optional<std::string> raw(const std::string& name) const {
        const CLI::Option* opt = opts_.at(name);
        if (opt->count() > 0) {
            if (auto f = flags_.find(name); f != flags_.end()) return f->second ? "true" : "false";
            return values_.at(name);
        }
        if (const char* env = std::getenv(env_name(name).c_str()); env != nullptr) return std::string(env);
        if (config_.is_object()) {
            if (auto sec = config_.find(section_); sec != config_.end() && sec->is_object()) {
                if (auto v = sec->find(name); v != sec->end()) return config_text(*v);
            }
            if (auto v = config_.find(name); v != config_.end() && !v->is_object()) return config_text(*v);
        }
        return std::nullopt;
    }

    bool given(const std::string& name) const { return raw(name).has_value(); }

    std::string text(const std::string& name, const std::string& fallback, bool record = true) {
        const std::string v = raw(name).value_or(fallback);
        if (record) effective_[name] = v;
        return v;
    }

    std::string required(const std::string& name, bool record = true) {
        auto v = raw(name);
        if (!v || v->empty()) throw ValidationError("--" + name + " is required");
        if (record) effective_[name] = *v;
        return *v;
    }

    double real(const std::string& name, double fallback, bool record = true) {
        auto v = raw(name);
        const double out = v ? parse_real(name, *v) : fallback;
        if (record) effective_[name] = out;
        return out;
    }

    std::optional<double> optional_real(const std::string& name) {
        auto v = raw(name);
        if (!v) return std::nullopt;
        const double out = parse_real(name, *v);
        effective_[name] = out;
        return out;
    }

    long long integer(const std::string& name, long long fallback, bool record = true) {
        auto v = raw(name);
        long long out = fallback;
        if (v) {
            std::size_t used = 0;
            try {
                out = std::stoll(*v, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != v->size()) {
                throw ValidationError("--" + name + " expects an integer, got '" + *v + "'");
            }
        }
        if (record) effective_[name] = out;
        return out;
    }

    bool boolean(const std::string& name, bool fallback, bool record = true) {
        auto v = raw(name);
        bool out = fallback;
        if (v) {
            std::string s = *v;
            std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
            if (s == "1" || s == "true" || s == "yes" || s == "on") {
                out = true;
            } else if (s == "0" || s == "false" || s == "no" || s == "off") {
                out = false;
            } else {
                throw ValidationError("--" + name + " expects a boolean, got '" + *v + "'");
            }
        }
        if (record) effective_[name] = out;
        return out;
    }

    int jobs() {
        const long long j = integer("jobs", 1, false);
        if (j < 1) throw ValidationError("--jobs must be >= 1");
        return static_cast<int>(j);
    }

    const ojson& effective() const { return effective_; }

private:
    static std::string config_text(const json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        return v.dump();
    }

    static double parse_real(const std::string& name, const std::string& v) {
        std::size_t used = 0;
        double out = 0.0;
        try {
            out = std::stod(v, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != v.size()) throw ValidationError("--" + name + " expects a number, got '" + v + "'");
        return out;
    }

    CLI::App* app_;
    std::string section_;
    std::string configPath_;
    json config_;
    std::map<std::string, std::string> values_;
    std::map<std::string, bool> flags_;
    std::map<std::string, CLI::Option*> opts_;
    ojson effective_ = ojson::object();
};

/// Collects a stage's artifacts and writes its manifest. Output keys are
/// file names relative to the output directory so that runs into different
/// directories stay comparable.
class Stage {
public:
    Stage(std::string command, fs::path outDir) : outDir_(std::move(outDir)) {
        manifest_.command = std::move(command);
    }

    void input(const fs::path& path) { manifest_.inputs[path.generic_string()] = file_digest(path); }
    void output(const std::string& name, const std::string& contents) {
        write_file(outDir_ / name, contents);
        manifest_.outputs[name] = sha256_hex(contents);
    }
    Manifest& manifest() { return manifest_; }

    void finish(const std::string& manifestName, const Settings& settings) {
        manifest_.config = settings.effective();
        write_file(outDir_ / manifestName, manifest_.to_json());
    }

private:
    fs::path outDir_;
    Manifest manifest_;
};

std::vector<fs::path> json_files_in(const fs::path& dir, const std::string& extension) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == extension) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

// ---- task files: a COCO document plus a "task" block describing the view

struct TaskFile {
    TaskView view;
    std::string scenario;
    std::set<CategoryId> previous;
};

std::string serialize_task_file(const TaskView& view, const TaskScenario& sc) {
    ojson doc = ojson::parse(serialize_coco(view.dataset));
    ojson task;
    task["index"] = view.taskIndex;
    task["scenario"] = sc.name;
    task["categories"] = std::vector<CategoryId>(view.visibleCategories.begin(), view.visibleCategories.end());
    const auto prev = cumulative_categories(sc, view.taskIndex - 1);
    task["previousCategories"] = std::vector<CategoryId>(prev.begin(), prev.end());
    doc["task"] = task;
    return doc.dump(1) + "\n";
}

TaskFile load_task_file(const fs::path& path) {
    return with_file_context(path, [&] {
        const std::string bytes = read_file(path);
        TaskFile tf;
        tf.view.dataset = parse_coco(bytes);
        const json doc = json::parse(bytes);
        auto it = doc.find("task");
        if (it == doc.end() || !it->is_object()) {
            throw ParseError("not a task file (missing 'task' block; produce it with 'vpl split')");
        }
        try {
            tf.view.taskIndex = it->at("index").get<int>();
            tf.scenario = it->at("scenario").get<std::string>();
            for (int c : it->at("categories").get<std::vector<int>>()) tf.view.visibleCategories.insert(c);
            for (int c : it->at("previousCategories").get<std::vector<int>>()) tf.previous.insert(c);
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad 'task' block: ") + e.what());
        }
        return tf;
    });
}

std::string task_name(const std::string& stem, int d) { return stem + "_task_" + std::to_string(d) + ".json"; }

// ---- split

Dataset load_dataset(const fs::path& path, const std::string& format, Stage& stage) {
    std::string fmt = format;
    if (fmt == "auto") fmt = fs::is_directory(path) ? "voc" : "coco";
    if (fmt == "coco") {
        stage.input(path);
        return with_file_context(path, [&] { return parse_coco(read_file(path)); });
    }
    if (fmt != "voc") throw ValidationError("--format must be auto, coco or voc");
    if (!fs::is_directory(path)) throw ValidationError("VOC input must be a directory of XML files: " + path.string());
    Dataset ds;
    ds.categories = voc_category_table();
    ds.provenance = Provenance::Voc;
    for (const auto& file : json_files_in(path, ".xml")) {
        stage.input(file);
        const std::vector<std::string> doc{read_file(file)};
        Dataset one = with_file_context(file, [&] { return parse_voc_xml(doc, ds.categories); });
        for (auto& img : one.images) ds.images.push_back(std::move(img));
    }
    if (ds.images.empty()) throw ValidationError("no .xml files in " + path.string());
    validate_dataset(ds);
    return ds;
}

std::vector<std::string> read_order_file(const fs::path& path) {
    std::vector<std::string> names;
    std::istringstream in(read_file(path));
    for (std::string line; std::getline(in, line);) {
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
        if (!line.empty()) names.push_back(line);
    }
    return names;
}

int cmd_split(Settings& s, std::ostream& out) {
    const fs::path dataset = s.required("dataset");
    const std::string format = s.text("format", "auto");
    const std::string scenario = s.required("scenario");
    const std::string order = s.text("category-order", "auto");
    const std::string orderFile = s.text("order-file", "");
    const fs::path outDir = s.required("out", false);

    Stage stage("split", outDir);
    const Dataset ds = load_dataset(dataset, format, stage);

    CategoryOrder ord = default_category_order(ds.provenance);
    if (order == "file") {
        ord = CategoryOrder::FileOrder;
    } else if (order == "alpha") {
        ord = CategoryOrder::Alphabetical;
    } else if (order == "id") {
        ord = CategoryOrder::AscendingId;
    } else if (order != "auto") {
        throw ValidationError("--category-order must be auto, file, alpha or id");
    }
    std::vector<std::string> overrideNames;
    if (!orderFile.empty()) {
        stage.input(orderFile);
        overrideNames = read_order_file(orderFile);
    }
    const auto universe = category_universe(ds.categories, ord, overrideNames);
    const TaskScenario sc = parse_scenario(scenario, universe);

    ojson scen;
    scen["name"] = sc.name;
    scen["tasks"] = sc.taskCategorySets;
    stage.output("scenario.json", scen.dump(1) + "\n");
    for (int d = 1; d <= static_cast<int>(sc.num_tasks()); ++d) {
        const TaskView view = build_task_view(ds, sc, d);
        stage.output("task_" + std::to_string(d) + ".json", serialize_task_file(view, sc));
        out << "task " << d << ": " << view.dataset.images.size() << " images, "
            << view.dataset.annotation_count() << " annotations, " << view.visibleCategories.size()
            << " classes\n";
    }
    stage.finish("split.manifest.json", s);
    return kExitOk;
}

// ---- pseudo

std::vector<DetectionOutput> read_detection_documents(const fs::path& file) {
    return with_file_context(file, [&] {
        const std::string bytes = read_file(file);
        json doc;
        try {
            doc = json::parse(bytes);
        } catch (const json::exception& e) {
            throw ParseError(std::string("malformed detector output: ") + e.what());
        }
        std::vector<DetectionOutput> outs;
        if (doc.is_array()) {
            for (const auto& d : doc) outs.push_back(detection_output_from_json(d));
        } else {
            outs.push_back(detection_output_from_json(doc));
        }
        return outs;
    });
}

int cmd_pseudo(Settings& s, std::ostream& out, std::ostream& err) {
    const fs::path taskPath = s.required("task-file", false);
    const double tau = s.real("tau", kDefaultTau);
    const std::string detections = s.text("detections", "", false);
    const std::string backendUrl = s.text("backend-url", "");
    const int jobs = s.jobs();
    const fs::path outDir = s.required("out", false);

    if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("--tau must lie in (0, 1)");
    if (detections.empty() == backendUrl.empty()) {
        throw ValidationError("give exactly one of --detections (file or directory) and --backend-url");
    }
    Stage stage("pseudo", outDir);
    stage.input(taskPath);
    const TaskFile tf = load_task_file(taskPath);
    const int d = tf.view.taskIndex;
    if (tf.previous.empty()) throw ValidationError("task " + std::to_string(d) + " has no earlier classes to pseudo-label");

    DetectionSource source;
    std::map<ImageId, DetectionOutput> byImage;
    std::unique_ptr<HttpDetectorClient> client;
    if (!detections.empty()) {
        std::vector<fs::path> files;
        if (fs::is_directory(detections)) {
            files = json_files_in(detections, ".json");
        } else {
            files.push_back(detections);
        }
        for (const auto& f : files) {
            stage.input(f);
            for (auto& o : read_detection_documents(f)) {
                const ImageId id = o.imageId;
                if (!byImage.emplace(id, std::move(o)).second) {
                    throw ValidationError(f.string() + ": second detector output for image " + id);
                }
            }
        }
        for (const auto& img : tf.view.dataset.images) {
            if (!byImage.contains(img.id)) {
                throw ValidationError("no detector output for image " + img.id + " under " + detections);
            }
        }
        source = [&](const ImageRecord& img) { return byImage.at(img.id); };
    } else {
        client = std::make_unique<HttpDetectorClient>(backendUrl);
        source = [&](const ImageRecord& img) {
            return client->detect({img.id, img.filePathOrUri, img.width, img.height});
        };
    }

    std::vector<PseudoGT> all = pseudo_label_images(tf.view.dataset, source, tau, jobs);
    PseudoFile file{d, tau, {}};
    std::size_t dropped = 0;
    for (auto& pg : all) {
        if (tf.previous.contains(pg.annotation.categoryId)) {
            file.items.push_back(std::move(pg));
        } else {
            ++dropped;
        }
    }
    if (dropped > 0) {
        err << "note: dropped " << dropped << " pseudo GTs of classes not learned before task " << d << "\n";
    }
    stage.manifest().extra["pseudoCount"] = file.items.size();
    stage.manifest().extra["droppedNotPreviousClass"] = dropped;
    stage.output(task_name("pseudo", d), serialize_pseudo_file(file));
    stage.finish(task_name("pseudo", d) + ".manifest.json", s);
    out << "task " << d << ": " << file.items.size() << " pseudo GTs at tau " << tau << "\n";
    return kExitOk;
}

// ---- verify

std::string serialize_verify_log(const VerifyResult& r) {
    ojson log = ojson::array();
    for (const auto& e : r.log) {
        ojson j;
        j["imageId"] = e.imageId;
        j["queryIndex"] = e.queryIndex;
        j["categoryId"] = e.categoryId;
        j["prompt"] = e.prompt;
        j["answer"] = std::string(to_string(e.verdict.answer));
        j["rawText"] = e.verdict.rawText;
        j["outcome"] = std::string(to_string(e.outcome));
        j["attempts"] = e.attempts;
        log.push_back(std::move(j));
    }
    ojson doc;
    doc["entries"] = std::move(log);
    doc["unparseable"] = r.unparseableCount;
    doc["warnings"] = r.warnings;
    return doc.dump(1) + "\n";
}

int cmd_verify(Settings& s, std::ostream& out, std::ostream& err) {
    const fs::path taskPath = s.required("task-file", false);
    const fs::path pseudoPath = s.required("pseudo", false);
    const std::string backendUrl = s.text("backend-url", "");
    const std::string oraclePath = s.text("oracle", "", false);
    OracleOptions oracle;
    oracle.iouThresh = s.real("oracle-iou", 0.5);
    oracle.flipProb = s.real("flip-prob", 0.0);
    oracle.seed = static_cast<std::uint64_t>(s.integer("seed", 0));
    VerifyOptions vo;
    const std::string policy = s.text("unparseable", "reject");
    if (policy == "reject") {
        vo.policy = UnparseablePolicy::Reject;
    } else if (policy == "accept") {
        vo.policy = UnparseablePolicy::Accept;
    } else {
        throw ValidationError("--unparseable must be reject or accept");
    }
    vo.retries = static_cast<int>(s.integer("retries", 2));
    vo.gridW = vo.gridH = static_cast<int>(s.integer("grid", kDefaultGridSide));
    const int timeoutMs = static_cast<int>(s.integer("timeout-ms", 30000));
    vo.jobs = s.jobs();
    const fs::path outDir = s.required("out", false);

    if (backendUrl.empty() == oraclePath.empty()) {
        throw ValidationError("give exactly one of --backend-url and --oracle <ground-truth file>");
    }
    Stage stage("verify", outDir);
    stage.input(taskPath);
    stage.input(pseudoPath);
    const TaskFile tf = load_task_file(taskPath);
    const PseudoFile pf = with_file_context(pseudoPath, [&] { return parse_pseudo_file(read_file(pseudoPath)); });
    if (pf.taskIndex != tf.view.taskIndex) {
        throw ValidationError(pseudoPath.string() + " is for task " + std::to_string(pf.taskIndex) + ", " +
                              taskPath.string() + " for task " + std::to_string(tf.view.taskIndex));
    }

    std::unique_ptr<VerificationBackend> backend;
    if (!oraclePath.empty()) {
        stage.input(oraclePath);
        Dataset truth = with_file_context(oraclePath, [&] { return parse_coco(read_file(oraclePath)); });
        backend = std::make_unique<OracleBackend>(std::move(truth), oracle);
    } else {
        backend = std::make_unique<HttpVerificationBackend>(backendUrl, timeoutMs);
    }

    const VerifyResult r = verify_batch(pf.items, tf.view.dataset, *backend, vo);
    PseudoFile accepted{pf.taskIndex, pf.tau, {}};
    for (const auto& pg : r.items) {
        if (pg.verification == Verification::Accepted) accepted.items.push_back(pg);
    }
    for (const auto& w : r.warnings) err << "warning: " << w << "\n";

    const int d = pf.taskIndex;
    stage.manifest().extra["backend"] = backend->id();
    stage.manifest().extra["accepted"] = accepted.items.size();
    stage.manifest().extra["rejected"] = r.items.size() - accepted.items.size();
    stage.manifest().extra["unparseable"] = r.unparseableCount;
    stage.manifest().extra["warnings"] = r.warnings.size();
    stage.manifest().seeds["oracle"] = oracle.seed;
    stage.output(task_name("verified", d), serialize_pseudo_file(accepted));
    stage.output(task_name("verify_log", d), serialize_verify_log(r));
    stage.finish(task_name("verified", d) + ".manifest.json", s);
    out << "task " << d << ": accepted " << accepted.items.size() << " of " << r.items.size() << " pseudo GTs";
    if (r.unparseableCount > 0) out << " (" << r.unparseableCount << " unparseable answers)";
    out << "\n";
    return kExitOk;
}

// ---- merge

int cmd_merge(Settings& s, std::ostream& out) {
    const fs::path taskPath = s.required("task-file", false);
    const fs::path pseudoPath = s.required("pseudo", false);
    const std::optional<double> nms = s.optional_real("nms-iou");
    const fs::path outDir = s.required("out", false);

    Stage stage("merge", outDir);
    stage.input(taskPath);
    stage.input(pseudoPath);
    const TaskFile tf = load_task_file(taskPath);
    const PseudoFile pf = with_file_context(pseudoPath, [&] { return parse_pseudo_file(read_file(pseudoPath)); });
    if (pf.taskIndex != tf.view.taskIndex) {
        throw ValidationError(pseudoPath.string() + " is for task " + std::to_string(pf.taskIndex) + ", " +
                              taskPath.string() + " for task " + std::to_string(tf.view.taskIndex));
    }
    const Dataset merged = merge_labels(tf.view, group_by_image(pf.items), nms);
    const int d = tf.view.taskIndex;
    stage.manifest().extra["realAnnotations"] = tf.view.dataset.annotation_count();
    stage.manifest().extra["pseudoAnnotations"] = merged.annotation_count() - tf.view.dataset.annotation_count();
    stage.manifest().extra["scenario"] = tf.scenario;
    stage.manifest().extra["tau"] = pf.tau;
    stage.output(task_name("merged", d), serialize_coco(merged));
    stage.finish(task_name("merged", d) + ".manifest.json", s);
    out << "task " << d << ": " << merged.annotation_count() << " training annotations ("
        << tf.view.dataset.annotation_count() << " real)\n";
    return kExitOk;
}

// ---- eval

/// Accepts a COCO results list ([{image_id, category_id, bbox, score}]) or
/// a COCO dataset whose annotations (optionally carrying "score") are used
/// as detections.
DetectionsByImage load_detections(const fs::path& path, const Dataset& gt) {
    return with_file_context(path, [&] {
        const std::string bytes = read_file(path);
        json doc;
        try {
            doc = json::parse(bytes);
        } catch (const json::exception& e) {
            throw ParseError(std::string("malformed detections: ") + e.what());
        }
        DetectionsByImage dets;
        for (const auto& img : gt.images) dets[img.id];
        if (doc.is_object()) {
            const Dataset ds = parse_coco(bytes);
            dets = detections_from_dataset(ds, 1.0);
            const auto& anns = doc.at("annotations");
            std::map<ImageId, std::size_t> seen;
            for (const auto& a : anns) {
                const json& idv = a.at("image_id");
                const ImageId id = idv.is_string() ? idv.get<std::string>() : std::to_string(idv.get<long long>());
                const std::size_t k = seen[id]++;
                if (a.contains("score")) dets[id].at(k).score = a["score"].get<double>();
            }
            return dets;
        }
        if (!doc.is_array()) throw ParseError("detections must be a COCO results array or a COCO dataset");
        for (std::size_t i = 0; i < doc.size(); ++i) {
            const json& r = doc[i];
            try {
                const json& idv = r.at("image_id");
                const ImageId id = idv.is_string() ? idv.get<std::string>() : std::to_string(idv.get<long long>());
                const auto b = r.at("bbox").get<std::vector<double>>();
                if (b.size() != 4) throw ParseError("bbox must have 4 numbers");
                const ImageRecord* img = gt.find_image(id);
                if (img == nullptr) throw ValidationError("unknown image " + id);
                ScoredDetection det;
                det.box = clamp_to_image(BBox::abs_corner(b[0], b[1], b[0] + b[2], b[1] + b[3]), img->size(),
                                         ClampPolicy::Clip);
                det.categoryId = r.at("category_id").get<int>();
                det.score = r.at("score").get<double>();
                dets[id].push_back(det);
            } catch (const json::exception& e) {
                throw ParseError("result " + std::to_string(i) + ": " + e.what());
            } catch (const Error& e) {
                throw ParseError("result " + std::to_string(i) + ": " + e.what());
            }
        }
        return dets;
    });
}

std::set<CategoryId> parse_id_list(const std::string& text) {
    std::set<CategoryId> ids;
    std::istringstream in(text);
    for (std::string tok; std::getline(in, tok, ',');) {
        try {
            std::size_t used = 0;
            ids.insert(std::stoi(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ValidationError("--categories expects comma-separated integers, got '" + text + "'");
        }
    }
    return ids;
}

int cmd_eval(Settings& s, std::ostream& out) {
    const fs::path gtPath = s.required("gt", false);
    const fs::path detPath = s.required("detections", false);
    EvalConfig ec;
    const std::string mode = s.text("mode", "voc");
    if (mode == "voc") {
        ec.mode = EvalMode::Voc;
    } else if (mode == "coco") {
        ec.mode = EvalMode::Coco;
    } else {
        throw ValidationError("--mode must be voc or coco");
    }
    ec.voc11pt = s.boolean("voc-11pt", false);
    ec.maxDetsPerImage = static_cast<std::size_t>(s.integer("max-dets", 100));
    const std::string cats = s.text("categories", "");
    if (!cats.empty()) ec.categories = parse_id_list(cats);
    const std::string outDir = s.text("out", "", false);

    const Dataset gt = with_file_context(gtPath, [&] { return parse_coco(read_file(gtPath)); });
    const DetectionsByImage dets = load_detections(detPath, gt);
    const EvalReport report = with_file_context(detPath, [&] { return evaluate(dets, gt, ec); });
    const std::string table = report_table(report, gt.categories);
    out << table;
    if (!outDir.empty()) {
        Stage stage("eval", outDir);
        stage.input(gtPath);
        stage.input(detPath);
        stage.output("eval_report.json", report_to_json(report, gt.categories));
        stage.output("eval_table.txt", table);
        stage.output("eval_per_class.csv", report_csv(report, gt.categories));
        stage.finish("eval.manifest.json", s);
    }
    return kExitOk;
}

// ---- synthetic world: simulate and synth

SynthWorldConfig world_config(Settings& s) {
    SynthWorldConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(s.integer("seed", 0));
    cfg.scenario = s.text("scenario", cfg.scenario);
    cfg.numClasses = static_cast<int>(s.integer("num-classes", cfg.numClasses));
    cfg.imagesPerTask = static_cast<int>(s.integer("images-per-task", cfg.imagesPerTask));
    cfg.objectsPerImage = static_cast<int>(s.integer("objects-per-image", cfg.objectsPerImage));
    auto& det = cfg.detector;
    det.recallDecay = s.real("recall-decay", det.recallDecay);
    det.hallucinationRate = s.real("hallucination-rate", det.hallucinationRate);
    det.boxJitter = s.real("box-jitter", det.boxJitter);
    det.scoreNoise = s.real("score-noise", det.scoreNoise);
    validate_config(cfg);
    return cfg;
}

void add_world_options(Settings& s) {
    s.option("seed", "world and verifier seed (default 0)");
    s.option("scenario", "task split of the synthetic classes (default 5+5+5+5)");
    s.option("num-classes", "number of synthetic classes (default 20)");
    s.option("images-per-task", "images generated per task (default 20)");
    s.option("objects-per-image", "objects per image (default 4)");
    s.option("recall-decay", "per-task recall decay of the synthetic detector (default 0.15)");
    s.option("hallucination-rate", "per-task wrong-class rate of the synthetic detector (default 0.10)");
    s.option("box-jitter", "box jitter std-dev in pixels (default 4)");
    s.option("score-noise", "score noise std-dev (default 0.05)");
    s.option("jobs", "worker threads (default 1); outputs do not depend on it");
}

int cmd_simulate(Settings& s, std::ostream& out) {
    SimulationConfig cfg;
    cfg.world = world_config(s);
    cfg.tau = s.real("tau", kDefaultTau);
    cfg.oracle.iouThresh = s.real("oracle-iou", 0.5);
    cfg.oracle.flipProb = s.real("flip-prob", 0.05);
    cfg.oracle.seed = derive_seed(cfg.world.seed, "oracle");
    cfg.nmsIoU = s.optional_real("nms-iou");
    cfg.gridSide = static_cast<int>(s.integer("grid", kDefaultGridSide));
    cfg.jobs = s.jobs();
    const std::string outDir = s.text("out", "", false);

    const SimulationResult r = run_simulation(cfg);
    const std::string table = format_comparison_table(r);
    out << table;
    if (!outDir.empty()) {
        Stage stage("simulate", outDir);
        stage.manifest().seeds["world"] = cfg.world.seed;
        stage.manifest().seeds["oracle"] = cfg.oracle.seed;
        stage.output("simulation.json", simulation_to_json(r));
        stage.output("simulation_table.txt", table);
        stage.finish("simulate.manifest.json", s);
    }
    return kExitOk;
}

int cmd_synth(Settings& s, std::ostream& out) {
    const SynthWorldConfig cfg = world_config(s);
    const int jobs = s.jobs();
    const fs::path outDir = s.required("out", false);

    const Dataset world = generate_world(cfg);
    const TaskScenario sc =
        parse_scenario(cfg.scenario, category_universe(world.categories, default_category_order(world.provenance)));
    Stage stage("synth", outDir);
    stage.manifest().seeds["world"] = cfg.seed;
    stage.output("world.json", serialize_coco(world));
    std::size_t files = 0;
    for (int d = 2; d <= static_cast<int>(sc.num_tasks()); ++d) {
        const TaskView view = build_task_view(world, sc, d);
        const SyntheticDetector det{cumulative_categories(sc, d - 1), d - 1, cfg};
        std::vector<std::string> docs(view.dataset.images.size());
        parallel_for(docs.size(), jobs, [&](std::size_t i) {
            const ImageRecord* truth = world.find_image(view.dataset.images[i].id);
            docs[i] = serialize_detection_output(synthetic_detect(det, *truth, d - 1));
        });
        for (std::size_t i = 0; i < docs.size(); ++i) {
            const std::string name = "detections/task_" + std::to_string(d) + "/" + view.dataset.images[i].id + ".json";
            stage.output(name, docs[i]);
            ++files;
        }
    }
    stage.finish("synth.manifest.json", s);
    out << "world: " << world.images.size() << " images, " << world.annotation_count() << " objects; " << files
        << " detector outputs\n";
    return kExitOk;
}

// ---- conformance

int cmd_conformance(Settings& s, std::ostream& out) {
    const std::string url = s.required("backend-url");
    const fs::path fixtures = s.text("fixtures", std::string(VPL_PROTOCOL_DIR) + "/fixtures");
    const int timeoutMs = static_cast<int>(s.integer("timeout-ms", 5000));
    const auto cases = load_conformance_cases(fixtures);
    const auto outcomes = run_conformance(url, cases, timeoutMs);
    std::size_t failed = 0;
    for (const auto& o : outcomes) {
        out << (o.passed ? "PASS " : "FAIL ") << o.name;
        if (!o.passed) out << ": " << o.message;
        out << "\n";
        failed += o.passed ? 0 : 1;
    }
    out << (outcomes.size() - failed) << "/" << outcomes.size() << " conformance cases passed\n";
    return failed == 0 ? kExitOk : kExitValidation;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"VLM-assisted pseudo-labeling for class-incremental object detection", "vpl"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    std::map<std::string, std::unique_ptr<Settings>> settings;
    std::map<std::string, std::function<int(Settings&)>> handlers;
    auto add = [&](const std::string& name, const std::string& help) -> Settings& {
        CLI::App* sub = app.add_subcommand(name, help);
        auto& slot = settings[name];
        slot = std::make_unique<Settings>(sub, name);
        return *slot;
    };

    {
        Settings& s = add("split", "write one training view per task of a scenario");
        s.option("dataset", "COCO JSON file or directory of VOC XML files");
        s.option("format", "auto (default), coco or voc");
        s.option("scenario", "task sizes, e.g. 15+5 or 5+5+5+5");
        s.option("category-order", "auto (VOC alphabetical, otherwise ascending id), file, alpha or id");
        s.option("order-file", "class names, one per line, overriding the category order");
        s.option("out", "output directory");
        handlers["split"] = [&](Settings& st) { return cmd_split(st, out); };
    }
    {
        Settings& s = add("pseudo", "extract pseudo GTs for a task from detector outputs");
        s.option("task-file", "task_<d>.json written by split");
        s.option("detections", "detector-output JSON file or directory of per-image files");
        s.option("backend-url", "detection service base URL (POST /detect) instead of files");
        s.option("tau", "confidence threshold (default 0.3)");
        s.option("jobs", "worker threads (default 1); outputs do not depend on it");
        s.option("out", "output directory");
        handlers["pseudo"] = [&](Settings& st) { return cmd_pseudo(st, out, err); };
    }
    {
        Settings& s = add("verify", "ask a verification backend about every pseudo GT");
        s.option("task-file", "task_<d>.json written by split");
        s.option("pseudo", "pseudo_task_<d>.json written by pseudo");
        s.option("backend-url", "verification service base URL (POST /verify)");
        s.option("oracle", "ground-truth COCO file; answers with the IoU oracle instead of a service");
        s.option("oracle-iou", "oracle IoU threshold (default 0.5)");
        s.option("flip-prob", "oracle answer flip probability (default 0)");
        s.option("seed", "oracle seed (default 0)");
        s.option("unparseable", "reject (default) or accept answers that are neither yes nor no");
        s.option("retries", "extra attempts after a transport failure (default 2)");
        s.option("grid", "mask grid side (default 24)");
        s.option("timeout-ms", "per-request timeout (default 30000)");
        s.option("jobs", "requests in flight (default 1); outputs do not depend on it");
        s.option("out", "output directory");
        handlers["verify"] = [&](Settings& st) { return cmd_verify(st, out, err); };
    }
    {
        Settings& s = add("merge", "combine verified pseudo GTs with a task's real annotations");
        s.option("task-file", "task_<d>.json written by split");
        s.option("pseudo", "verified_task_<d>.json (or pseudo_task_<d>.json for the unfiltered arm)");
        s.option("nms-iou", "per-class suppression threshold for pseudo GTs (off by default)");
        s.option("out", "output directory");
        handlers["merge"] = [&](Settings& st) { return cmd_merge(st, out); };
    }
    {
        Settings& s = add("eval", "AP evaluation of detections against ground truth");
        s.option("gt", "ground-truth COCO file");
        s.option("detections", "COCO results array, or a COCO dataset used as detections");
        s.option("mode", "voc (AP50, default) or coco (AP over 0.50:0.95, size buckets)");
        s.flag("voc-11pt", "use 11-point interpolation in voc mode");
        s.option("max-dets", "detections kept per image in coco mode (default 100)");
        s.option("categories", "comma-separated category ids to evaluate (default all)");
        s.option("out", "output directory for report JSON, table and CSV");
        handlers["eval"] = [&](Settings& st) { return cmd_eval(st, out); };
    }
    {
        Settings& s = add("simulate", "synthetic multi-task run comparing unfiltered and verified pseudo-labels");
        add_world_options(s);
        s.option("tau", "confidence threshold (default 0.3)");
        s.option("oracle-iou", "oracle IoU threshold (default 0.5)");
        s.option("flip-prob", "oracle answer flip probability (default 0.05)");
        s.option("nms-iou", "per-class suppression threshold for pseudo GTs (off by default)");
        s.option("grid", "mask grid side (default 24)");
        s.option("out", "output directory (table is always printed)");
        handlers["simulate"] = [&](Settings& st) { return cmd_simulate(st, out); };
    }
    {
        Settings& s = add("synth", "write a synthetic world and its per-task detector outputs");
        add_world_options(s);
        s.option("out", "output directory");
        handlers["synth"] = [&](Settings& st) { return cmd_synth(st, out); };
    }
    {
        Settings& s = add("conformance", "run the protocol conformance suite against a live service");
        s.option("backend-url", "service base URL");
        s.option("fixtures", "fixture directory (default: the installed protocol/fixtures)");
        s.option("timeout-ms", "per-request timeout (default 5000)");
        handlers["conformance"] = [&](Settings& st) { return cmd_conformance(st, out); };
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    for (auto& [name, s] : settings) {
        if (!app.got_subcommand(name)) continue;
        try {
            s->load_config();
            return handlers.at(name)(*s);
        } catch (const BackendError& e) {
            err << "error: " << e.what() << "\n";
            return kExitBackend;
        } catch (const Error& e) {
            err << "error: " << e.what() << "\n";
            return kExitValidation;
        } catch (const std::exception& e) {
            err << "error: " << e.what() << "\n";
            return kExitValidation;
        }
    }
    return kExitValidation;
}

}  // namespace vpl::cli
