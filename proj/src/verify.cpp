#include "vpl/verify.hpp"

#include "vpl/error.hpp"
#include "vpl/parallel.hpp"
#include "vpl/rng.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <exception>
#include <optional>

namespace vpl {

namespace {

constexpr std::string_view kPromptLead = " Considering the region ";
constexpr std::string_view kPromptMiddle = " of the image, would you classify it as a ";
constexpr std::string_view kPromptTail =
    " category without any doubt? Respond with only 'yes' or 'no'.";

long long round_half_up(double v) { return static_cast<long long>(std::floor(v + 0.5)); }

std::optional<CategoryId> resolve_category(const CategoryTable& table, std::string_view name) {
    if (const Category* c = table.find_by_name(name)) return c->id;
    return std::nullopt;
}

Verdict oracle_answer(const BBox& box, std::optional<CategoryId> category,
                      std::span<const Annotation> trueGTs, double iouThresh, double flipProb,
                      std::uint64_t seed, std::string_view key) {
    if (!(flipProb >= 0.0 && flipProb < 0.5)) {
        throw ValidationError("oracle flip probability must lie in [0, 0.5)");
    }
    bool yes = false;
    if (category) {
        for (const auto& gt : trueGTs) {
            if (gt.categoryId == *category && iou(box, gt.box) >= iouThresh) {
                yes = true;
                break;
            }
        }
    }
    if (flipProb > 0.0) {
        SeededRng rng(derive_seed(seed, key));
        if (rng.bernoulli(flipProb)) yes = !yes;
    }
    Verdict v;
    v.answer = yes ? Answer::Yes : Answer::No;
    v.rawText = yes ? "yes" : "no";
    return v;
}

}  // namespace

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

BinaryMask make_binary_mask(const BBox& box, ImageSize image, int gridW, int gridH) {
    if (gridW < 1 || gridH < 1) throw ValidationError("mask grid dimensions must be >= 1");
    if (image.width <= 0 || image.height <= 0) throw ValidationError("image dimensions must be positive");
    if (box.format != BoxFormat::AbsCorner) throw ValidationError("mask requires an AbsCorner box");
    const BBox clamped = clamp_to_image(box, image, ClampPolicy::Clip);

    BinaryMask mask{gridW, gridH, std::vector<std::uint8_t>(static_cast<std::size_t>(gridW * gridH), 0)};
    const double cell_w = static_cast<double>(image.width) / gridW;
    const double cell_h = static_cast<double>(image.height) / gridH;
    for (int i = 0; i < gridH; ++i) {
        const double cy = (i + 0.5) * cell_h;
        if (cy < clamped.y1() || cy > clamped.y2()) continue;
        for (int j = 0; j < gridW; ++j) {
            const double cx = (j + 0.5) * cell_w;
            if (cx >= clamped.x1() && cx <= clamped.x2()) mask.cells[static_cast<std::size_t>(i * gridW + j)] = 1;
        }
    }
    if (mask.count() == 0) {
        const int j = std::min(gridW - 1, static_cast<int>((clamped.x1() + clamped.x2()) / 2.0 / cell_w));
        const int i = std::min(gridH - 1, static_cast<int>((clamped.y1() + clamped.y2()) / 2.0 / cell_h));
        mask.cells[static_cast<std::size_t>(i * gridW + j)] = 1;
    }
    return mask;
}

std::string format_location(const BBox& box) {
    return "[" + std::to_string(round_half_up(box.x1())) + ", " + std::to_string(round_half_up(box.y1())) +
           ", " + std::to_string(round_half_up(box.x2())) + ", " + std::to_string(round_half_up(box.y2())) +
           "]";
}

VerificationPrompt format_prompt(const PseudoGT& pg, const ImageRecord& image, int gridW, int gridH) {
    const auto& name = pg.annotation.categoryName;
    if (name.empty()) {
        throw ValidationError("pseudo GT (image " + image.id + ", query " + std::to_string(pg.queryIndex) +
                              ") has no category name");
    }
    if (name.find_first_of("<>") != std::string::npos) {
        throw ValidationError("category name '" + name + "' contains prompt marker characters");
    }
    if (pg.annotation.box.format != BoxFormat::AbsCorner) {
        throw ValidationError("pseudo GT box must be AbsCorner before prompting");
    }
    VerificationPrompt p;
    p.imageRef = image.id;
    p.imagePath = image.filePathOrUri;
    p.boxAbs = pg.annotation.box;
    p.categoryName = name;
    p.maskGrid = make_binary_mask(pg.annotation.box, image.size(), gridW, gridH);
    p.promptText.reserve(200);
    p.promptText.append(kImageFeatureMarker)
        .append(kPromptLead)
        .append(format_location(pg.annotation.box))
        .append(" ")
        .append(kRegionFeatureMarker)
        .append(kPromptMiddle)
        .append(name)
        .append(kPromptTail);
    return p;
}

std::string category_from_prompt(std::string_view prompt) {
    const auto start = prompt.find(kPromptMiddle);
    if (start == std::string_view::npos) return {};
    const auto name_begin = start + kPromptMiddle.size();
    if (prompt.size() < name_begin + kPromptTail.size()) return {};
    if (prompt.substr(prompt.size() - kPromptTail.size()) != kPromptTail) return {};
    return std::string(prompt.substr(name_begin, prompt.size() - kPromptTail.size() - name_begin));
}

std::string_view to_string(Answer a) {
    switch (a) {
        case Answer::Yes: return "yes";
        case Answer::No: return "no";
        case Answer::Unparseable: return "unparseable";
    }
    return "unparseable";
}

Verdict parse_verdict(std::string_view raw) {
    auto strip = [](unsigned char c) { return std::isspace(c) || std::ispunct(c); };
    std::size_t b = 0;
    std::size_t e = raw.size();
    while (b < e && strip(static_cast<unsigned char>(raw[b]))) ++b;
    while (e > b && strip(static_cast<unsigned char>(raw[e - 1]))) --e;
    std::string token;
    for (std::size_t i = b; i < e && std::isalpha(static_cast<unsigned char>(raw[i])); ++i) {
        token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(raw[i]))));
    }
    Verdict v;
    v.rawText = std::string(raw);
    if (token == "yes") {
        v.answer = Answer::Yes;
    } else if (token == "no") {
        v.answer = Answer::No;
    } else {
        v.answer = Answer::Unparseable;
    }
    return v;
}

std::string idempotency_key(const PseudoGT& pg) {
    return pg.annotation.sourceImageId + "#" + std::to_string(pg.queryIndex);
}

Verdict oracle_verdict(const PseudoGT& pg, std::span<const Annotation> trueGTs, double iouThresh,
                       double flipProb, std::uint64_t seed) {
    return oracle_answer(pg.annotation.box, pg.annotation.categoryId, trueGTs,
                         iouThresh, flipProb, seed, idempotency_key(pg));
}

OracleBackend::OracleBackend(Dataset truth, OracleOptions options)
    : truth_(std::move(truth)), options_(options) {
    if (!(options_.flipProb >= 0.0 && options_.flipProb < 0.5)) {
        throw ValidationError("oracle flip probability must lie in [0, 0.5)");
    }
}

std::string OracleBackend::id() const {
    return "oracle(iou=" + std::to_string(options_.iouThresh) + ",flip=" + std::to_string(options_.flipProb) +
           ",seed=" + std::to_string(options_.seed) + ")";
}

std::string OracleBackend::ask(const VerificationRequest& request) const {
    const ImageRecord* img = truth_.find_image(request.prompt.imageRef);
    std::span<const Annotation> gts;
    if (img != nullptr) gts = img->annotations;
    std::string name = category_from_prompt(request.prompt.promptText);
    if (name.empty()) name = request.prompt.categoryName;
    const auto category = resolve_category(truth_.categories, name);
    return oracle_answer(request.prompt.boxAbs, category, gts, options_.iouThresh,
                         options_.flipProb, options_.seed, request.idempotencyKey)
        .rawText;
}

std::size_t VerifyResult::accepted_count() const {
    return static_cast<std::size_t>(std::count_if(items.begin(), items.end(), [](const PseudoGT& p) {
        return p.verification == Verification::Accepted;
    }));
}

VerifyResult verify_batch(std::span<const PseudoGT> pgs, const Dataset& images,
                          const VerificationBackend& backend, const VerifyOptions& options) {
    if (options.retries < 0) throw ValidationError("retry count must be >= 0");
    std::vector<VerificationRequest> requests;
    requests.reserve(pgs.size());
    for (const auto& pg : pgs) {
        const ImageRecord* img = images.find_image(pg.annotation.sourceImageId);
        if (img == nullptr) {
            throw ValidationError("pseudo GT refers to unknown image " + pg.annotation.sourceImageId);
        }
        requests.push_back({format_prompt(pg, *img, options.gridW, options.gridH), idempotency_key(pg)});
    }

    struct Slot {
        Verdict verdict;
        int attempts = 0;
        std::exception_ptr error;
    };
    std::vector<Slot> slots(pgs.size());

    auto run_one = [&](std::size_t i) {
        Slot& slot = slots[i];
        for (int attempt = 0; attempt <= options.retries; ++attempt) {
            slot.attempts = attempt + 1;
            try {
                const auto t0 = std::chrono::steady_clock::now();
                std::string text = backend.ask(requests[i]);
                const auto t1 = std::chrono::steady_clock::now();
                slot.verdict = parse_verdict(text);
                slot.verdict.latencyMs = std::chrono::duration<double, std::milli>(t1 - t0).count();
                slot.error = nullptr;
                return;
            } catch (const BackendError&) {
                slot.error = std::current_exception();
            } catch (...) {
                slot.error = std::current_exception();
                return;
            }
        }
    };

    parallel_for(pgs.size(), options.jobs, run_one);

    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (!slots[i].error) continue;
        try {
            std::rethrow_exception(slots[i].error);
        } catch (const BackendError& e) {
            throw BackendError("verification of " + requests[i].idempotencyKey + " failed after " +
                               std::to_string(slots[i].attempts) + " attempt(s): " + e.what());
        }
    }

    VerifyResult result;
    result.items.assign(pgs.begin(), pgs.end());
    for (std::size_t i = 0; i < pgs.size(); ++i) {
        auto& pg = result.items[i];
        const Verdict& v = slots[i].verdict;
        switch (v.answer) {
            case Answer::Yes: pg.verification = Verification::Accepted; break;
            case Answer::No: pg.verification = Verification::Rejected; break;
            case Answer::Unparseable:
                ++result.unparseableCount;
                pg.verification = options.policy == UnparseablePolicy::Accept ? Verification::Accepted
                                                                              : Verification::Rejected;
                result.warnings.push_back("unparseable verdict for " + requests[i].idempotencyKey + ": '" +
                                          v.rawText + "' -> " + std::string(to_string(pg.verification)));
                break;
        }
        result.log.push_back({pg.annotation.sourceImageId, pg.queryIndex, pg.annotation.categoryId,
                              requests[i].prompt.promptText, v, pg.verification, slots[i].attempts});
    }
    return result;
}

}  // namespace vpl
