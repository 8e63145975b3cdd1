#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "weightlab/train.hpp"

namespace weightlab {

inline constexpr int kImageSide = 16;
inline constexpr int kImagePixels = kImageSide * kImageSide;

enum class CohortTag { internal, ext_adult, ext_ped2, ext_ped11, ext_ped18, pretext };

std::string to_string(CohortTag tag);
CohortTag cohort_tag_from_string(const std::string& s);

/// Distribution-shift knobs for a cohort. contrast_gain rescales pixel
/// values around 0.5 (negative values invert), structure_scale sizes the
/// abnormal "opacity" structure, noise_level scales background texture.
struct ShiftParams {
    double contrast_gain = 1.0;
    double structure_scale = 1.0;
    double noise_level = 0.10;
};

struct Sample {
    std::vector<double> image;  // 16x16 row-major, values in [0, 1]
    int label = 0;              // 1 = abnormal analog
    int group_id = 0;           // patient analog
    CohortTag cohort = CohortTag::internal;
};

struct CohortConfig {
    std::size_t n_samples = 1000;
    double abnormal_fraction = 0.5;
    ShiftParams shift;
    int groups = 50;
    std::uint64_t seed = 0;
    CohortTag tag = CohortTag::internal;

    void validate() const;
};

struct Cohort {
    CohortConfig config;
    std::vector<Sample> samples;
};

/// Deterministic synthetic cohort. Abnormal samples carry a bright
/// elliptical structure on background texture; normals occasionally carry a
/// faint distractor so global brightness alone does not separate classes.
Cohort generate_cohort(const CohortConfig& config);

struct GroupSplit {
    std::vector<Sample> train, val, test;
};

/// Partition by whole groups into ~70/10/20 by sample count. No group
/// straddles splits; deterministic in the cohort seed.
GroupSplit split_group_level(const Cohort& cohort);

struct PeriodicSplit {
    std::vector<Sample> p_train, p_val;
};

/// First "arrival" halves of train and val, taken by whole groups in
/// ascending group-id order until at least half the samples are covered.
/// The test split is untouched by construction.
PeriodicSplit halve_periodic(const std::vector<Sample>& train, const std::vector<Sample>& val);

Dataset make_dataset(const std::vector<Sample>& samples);

/// JSON-lines persistence (one Sample per line) plus a sidecar
/// <path>.manifest.json recording config and seed.
void write_cohort_jsonl(const std::filesystem::path& path, const Cohort& cohort);
Cohort read_cohort_jsonl(const std::filesystem::path& path);

}  // namespace weightlab
