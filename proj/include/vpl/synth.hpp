#pragma once

#include "vpl/dataset.hpp"
#include "vpl/pseudo.hpp"

#include <cstdint>
#include <set>
#include <string>

namespace vpl {

/// Error model of the synthetic detector. Staleness counts the incremental
/// steps since the detector's knowledge was fresh.
struct DetectorErrorModel {
    double recallDecay = 0.15;        ///< per-object emission prob is (1 - decay)^staleness
    double hallucinationRate = 0.10;  ///< per stale known class, P(wrong-class box) = rate * staleness
    double boxJitter = 4.0;           ///< std-dev of per-corner Gaussian jitter, pixels
    double scoreNoise = 0.05;         ///< std-dev of additive Gaussian score noise
    double stalenessPenalty = 0.05;   ///< subtracted from true-object scores per staleness step
    double hallucinationScoreMin = 0.35;
    double hallucinationScoreMax = 0.85;
    int numQueries = 100;
};

struct SynthWorldConfig {
    int numClasses = 20;
    int imagesPerTask = 20;
    int objectsPerImage = 4;
    ImageSize imageSize{640, 480};
    std::uint64_t seed = 0;
    /// When set, image group g (imagesPerTask images each) is guaranteed an
    /// object of task g, so every task view is non-empty. Empty: one group of
    /// imagesPerTask images with uniform classes.
    std::string scenario = "5+5+5+5";
    DetectorErrorModel detector;
};

/// Throws ValidationError on out-of-range probabilities or sizes.
void validate_config(const SynthWorldConfig& cfg);

/// Images with non-overlapping (pairwise IoU < 0.3) integer boxes and
/// uniformly drawn classes "class_01".."class_NN" (ids 1..N). Reproducible
/// from cfg.seed.
Dataset generate_world(const SynthWorldConfig& cfg);

struct SyntheticDetector {
    std::set<CategoryId> knownCategories;
    int trainedAtTask = 0;
    SynthWorldConfig config;
};

/// Simulated query-based detector output on one image with true objects
/// `image.annotations` (probabilities, background last). Deterministic per
/// (seed, image id, trainedAtTask, staleness).
DetectionOutput synthetic_detect(const SyntheticDetector& det, const ImageRecord& image, int staleness);

}  // namespace vpl
