#pragma once

#include "vpl/dataset.hpp"
#include "vpl/pseudo.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vpl {

/// gridH x gridW matrix of 0/1 cells, row-major.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> cells;

    std::uint8_t at(int row, int col) const { return cells[static_cast<std::size_t>(row * width + col)]; }
    std::size_t count() const;

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

/// Feature-map side of the reference VLM: 336 px input, 14 px patches.
inline constexpr int kDefaultGridSide = 24;

inline constexpr std::string_view kImageFeatureMarker = "<image feature>";
inline constexpr std::string_view kRegionFeatureMarker = "<region feature>";

/// Marks the grid cells whose centers fall inside `box` (closed interval,
/// uniform grid over the image). A box too small to contain any cell
/// center marks the cell containing its own center instead.
BinaryMask make_binary_mask(const BBox& box, ImageSize image, int gridW, int gridH);

struct VerificationPrompt {
    ImageId imageRef;
    std::string imagePath;
    std::string promptText;
    BBox boxAbs;
    BinaryMask maskGrid;
    std::string categoryName;
};

/// Builds the yes/no verification question for one pseudo GT:
///
///   <image feature> Considering the region [x1, y1, x2, y2] <region feature>
///   of the image, would you classify it as a NAME category without any
///   doubt? Respond with only 'yes' or 'no'.
///
/// (one line). Coordinates are rounded half-up to integers; the two feature
/// markers stay literal for the backend to substitute.
VerificationPrompt format_prompt(const PseudoGT& pg, const ImageRecord& image,
                                 int gridW = kDefaultGridSide, int gridH = kDefaultGridSide);

/// The location text used in prompts, e.g. "[10, 21, 110, 220]".
std::string format_location(const BBox& box);

/// Inverse of the name substitution in format_prompt; empty when `prompt`
/// does not follow the template.
std::string category_from_prompt(std::string_view prompt);

enum class Answer { Yes, No, Unparseable };

std::string_view to_string(Answer a);

struct Verdict {
    Answer answer = Answer::Unparseable;
    std::string rawText;
    double latencyMs = 0.0;
};

/// Trims whitespace and punctuation, lowercases, and reads the leading
/// alphabetic token: "yes" -> Yes, "no" -> No, anything else Unparseable.
Verdict parse_verdict(std::string_view raw);

/// Retry-safe identity of a verification request: "<imageId>#<queryIndex>".
std::string idempotency_key(const PseudoGT& pg);

struct VerificationRequest {
    VerificationPrompt prompt;
    std::string idempotencyKey;
};

/// Something that answers verification prompts with free text. ask() must
/// be safe to call concurrently and throws BackendError on transport failure.
class VerificationBackend {
public:
    virtual ~VerificationBackend() = default;
    virtual std::string id() const = 0;
    virtual std::string ask(const VerificationRequest& request) const = 0;
};

struct OracleOptions {
    double iouThresh = 0.5;
    double flipProb = 0.0;
    std::uint64_t seed = 0;
};

/// Ground-truth stand-in for the VLM: Yes iff some true GT of the same class
/// overlaps with IoU >= iouThresh, flipped with probability flipProb. The
/// flip draw is seeded by (seed, idempotency key), so verdicts do not depend
/// on call order.
Verdict oracle_verdict(const PseudoGT& pg, std::span<const Annotation> trueGTs, double iouThresh,
                       double flipProb, std::uint64_t seed);

/// Backend that answers with oracle_verdict against a ground-truth dataset,
/// resolving the class from the prompt text.
class OracleBackend final : public VerificationBackend {
public:
    OracleBackend(Dataset truth, OracleOptions options);
    std::string id() const override;
    std::string ask(const VerificationRequest& request) const override;

private:
    Dataset truth_;
    OracleOptions options_;
};

enum class UnparseablePolicy { Reject, Accept };

struct VerifyOptions {
    UnparseablePolicy policy = UnparseablePolicy::Reject;
    int retries = 2;  // extra attempts after the first transport failure
    int jobs = 1;
    int gridW = kDefaultGridSide;
    int gridH = kDefaultGridSide;
};

struct VerifyLogEntry {
    ImageId imageId;
    int queryIndex = 0;
    CategoryId categoryId = 0;
    std::string prompt;
    Verdict verdict;
    Verification outcome = Verification::Unverified;
    int attempts = 0;
};

struct VerifyResult {
    std::vector<PseudoGT> items;  // input order, only the mark changed
    std::vector<VerifyLogEntry> log;
    std::size_t unparseableCount = 0;
    std::vector<std::string> warnings;

    std::size_t accepted_count() const;
};

/// Asks `backend` about every pseudo GT (images looked up in `images`) and
/// marks each Accepted/Rejected. Output is identical for any `jobs` value.
/// Throws BackendError when a request still fails after the retries.
VerifyResult verify_batch(std::span<const PseudoGT> pgs, const Dataset& images,
                          const VerificationBackend& backend, const VerifyOptions& options = {});

}  // namespace vpl
