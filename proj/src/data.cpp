#include "weightlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "weightlab/rng.hpp"
#include "weightlab/weight_io.hpp"

namespace weightlab {

std::string to_string(CohortTag tag) {
    switch (tag) {
        case CohortTag::internal: return "internal";
        case CohortTag::ext_adult: return "ext_adult";
        case CohortTag::ext_ped2: return "ext_ped2";
        case CohortTag::ext_ped11: return "ext_ped11";
        case CohortTag::ext_ped18: return "ext_ped18";
        case CohortTag::pretext: return "pretext";
    }
    return "internal";
}

CohortTag cohort_tag_from_string(const std::string& s) {
    for (CohortTag t : {CohortTag::internal, CohortTag::ext_adult, CohortTag::ext_ped2,
                        CohortTag::ext_ped11, CohortTag::ext_ped18, CohortTag::pretext}) {
        if (to_string(t) == s) return t;
    }
    throw std::invalid_argument("unknown cohort tag: " + s);
}

void CohortConfig::validate() const {
    if (n_samples < 1) throw std::invalid_argument("CohortConfig: n_samples must be >= 1");
    if (!(abnormal_fraction > 0.0 && abnormal_fraction < 1.0)) {
        throw std::invalid_argument("CohortConfig: abnormal_fraction must lie in (0, 1)");
    }
    if (groups < 10) throw std::invalid_argument("CohortConfig: needs at least 10 groups");
}

namespace {

constexpr double kBaseLevel = 0.35;
// Main-task opacities are deliberately faint: detecting them through the
// pooled backbone requires learned structure filters, not just the image
// mean.
constexpr double kAbnormalAmplitude = 0.22;
constexpr double kBaseRadius = 2.8;
// Pretext cohorts carry a high-contrast structure in every sample and label
// its size instead of its presence; the size gap keeps the task learnable
// through a global-average-pooled backbone.
constexpr double kPretextAmplitude = 0.45;
constexpr double kPretextLargeScale = 1.45;
constexpr double kPretextSmallScale = 0.62;
constexpr int kCoarse = 5;  // coarse texture grid

void add_ellipse(std::vector<double>& img, double cy, double cx, double ry, double rx,
                 double amp) {
    for (int y = 0; y < kImageSide; ++y) {
        for (int x = 0; x < kImageSide; ++x) {
            double dy = (y - cy) / ry;
            double dx = (x - cx) / rx;
            img[static_cast<std::size_t>(y * kImageSide + x)] +=
                amp * std::exp(-(dy * dy + dx * dx));
        }
    }
}

std::vector<double> render_sample(Rng& rng, int label, const ShiftParams& shift,
                                  CohortTag tag) {
    std::vector<double> img(kImagePixels, kBaseLevel);

    // Smooth background: bilinear upsample of a coarse normal grid plus
    // per-pixel grain, both scaled by noise_level.
    double coarse[kCoarse][kCoarse];
    for (auto& row : coarse) {
        for (double& v : row) v = rng.normal();
    }
    for (int y = 0; y < kImageSide; ++y) {
        double fy = static_cast<double>(y) / (kImageSide - 1) * (kCoarse - 1);
        int y0 = std::min(static_cast<int>(fy), kCoarse - 2);
        double ty = fy - y0;
        for (int x = 0; x < kImageSide; ++x) {
            double fx = static_cast<double>(x) / (kImageSide - 1) * (kCoarse - 1);
            int x0 = std::min(static_cast<int>(fx), kCoarse - 2);
            double tx = fx - x0;
            double smooth = (1 - ty) * ((1 - tx) * coarse[y0][x0] + tx * coarse[y0][x0 + 1]) +
                            ty * ((1 - tx) * coarse[y0 + 1][x0] + tx * coarse[y0 + 1][x0 + 1]);
            img[static_cast<std::size_t>(y * kImageSide + x)] +=
                shift.noise_level * (0.6 * smooth + 0.4 * rng.normal());
        }
    }

    double cy = rng.uniform(4.5, 10.5);
    double cx = rng.uniform(4.5, 10.5);
    double ry = shift.structure_scale * kBaseRadius * rng.uniform(0.75, 1.3);
    double rx = shift.structure_scale * kBaseRadius * rng.uniform(0.75, 1.3);
    double amp_jitter = rng.uniform(0.8, 1.2);
    if (tag == CohortTag::pretext) {
        // every pretext sample carries a structure; the label encodes size
        double size = label == 1 ? kPretextLargeScale : kPretextSmallScale;
        add_ellipse(img, cy, cx, size * ry, size * rx, kPretextAmplitude * amp_jitter);
    } else if (label == 1) {
        add_ellipse(img, cy, cx, ry, rx, kAbnormalAmplitude * amp_jitter);
    }
    // class-0 main-task samples are background texture only

    for (double& v : img) {
        v = 0.5 + shift.contrast_gain * (v - 0.5);  // acquisition-style contrast
        v = std::clamp(v, 0.0, 1.0);
    }
    return img;
}

}  // namespace

Cohort generate_cohort(const CohortConfig& config) {
    config.validate();
    Cohort cohort;
    cohort.config = config;
    cohort.samples.reserve(config.n_samples);
    Rng rng(config.seed);
    for (std::size_t i = 0; i < config.n_samples; ++i) {
        Sample s;
        s.label = rng.uniform01() < config.abnormal_fraction ? 1 : 0;
        s.image = render_sample(rng, s.label, config.shift, config.tag);
        s.group_id = static_cast<int>(i % static_cast<std::size_t>(config.groups));
        s.cohort = config.tag;
        cohort.samples.push_back(std::move(s));
    }
    return cohort;
}

namespace {

std::map<int, std::vector<std::size_t>> by_group(const std::vector<Sample>& samples) {
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        groups[samples[i].group_id].push_back(i);
    }
    return groups;
}

}  // namespace

GroupSplit split_group_level(const Cohort& cohort) {
    auto groups = by_group(cohort.samples);
    if (groups.size() < 10) {
        throw std::invalid_argument("split_group_level: needs at least 10 groups, got " +
                                    std::to_string(groups.size()));
    }
    std::vector<int> ids;
    ids.reserve(groups.size());
    for (const auto& [id, members] : groups) ids.push_back(id);
    Rng rng(mix_seed(cohort.config.seed, 0x5917));
    rng.shuffle(ids);

    double total = static_cast<double>(cohort.samples.size());
    GroupSplit split;
    std::size_t cum = 0;
    for (int id : ids) {
        const auto& members = groups[id];
        std::vector<Sample>* dst;
        if (static_cast<double>(cum) < 0.7 * total) {
            dst = &split.train;
        } else if (static_cast<double>(cum) < 0.8 * total) {
            dst = &split.val;
        } else {
            dst = &split.test;
        }
        for (std::size_t i : members) dst->push_back(cohort.samples[i]);
        cum += members.size();
    }
    if (split.train.empty() || split.val.empty() || split.test.empty()) {
        throw std::invalid_argument("split_group_level: a group is too large for the 70/10/20 split");
    }
    return split;
}

PeriodicSplit halve_periodic(const std::vector<Sample>& train, const std::vector<Sample>& val) {
    auto take_first_half = [](const std::vector<Sample>& samples) {
        auto groups = by_group(samples);
        std::size_t half = (samples.size() + 1) / 2;
        std::vector<Sample> out;
        std::size_t cum = 0;
        for (const auto& [id, members] : groups) {  // ascending group id = arrival order
            if (cum >= half) break;
            for (std::size_t i : members) out.push_back(samples[i]);
            cum += members.size();
        }
        return out;
    };
    PeriodicSplit p;
    p.p_train = take_first_half(train);
    p.p_val = take_first_half(val);
    return p;
}

Dataset make_dataset(const std::vector<Sample>& samples) {
    if (samples.empty()) throw std::invalid_argument("make_dataset: no samples");
    Dataset d;
    d.images = TensorF::zeros({samples.size(), 1, kImageSide, kImageSide});
    d.labels = TensorF::zeros({samples.size(), 2});
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].image.size() != kImagePixels) {
            throw std::invalid_argument("make_dataset: sample image is not 16x16");
        }
        std::copy(samples[i].image.begin(), samples[i].image.end(),
                  d.images.values.begin() + i * kImagePixels);
        d.labels.values[i * 2 + static_cast<std::size_t>(samples[i].label)] = 1.0;
    }
    return d;
}

void write_cohort_jsonl(const std::filesystem::path& path, const Cohort& cohort) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (const Sample& s : cohort.samples) {
        f << "{\"image\":[";
        for (std::size_t i = 0; i < s.image.size(); ++i) {
            if (i) f << ',';
            f << format_double(s.image[i]);
        }
        f << "],\"label\":" << s.label << ",\"group_id\":" << s.group_id << ",\"cohort\":\""
          << to_string(s.cohort) << "\"}\n";
    }
    if (!f) throw std::runtime_error("write failed: " + path.string());

    const CohortConfig& c = cohort.config;
    std::ofstream m(path.string() + ".manifest.json", std::ios::binary);
    m << "{\"n_samples\":" << c.n_samples << ",\"abnormal_fraction\":"
      << format_double(c.abnormal_fraction) << ",\"contrast_gain\":"
      << format_double(c.shift.contrast_gain) << ",\"structure_scale\":"
      << format_double(c.shift.structure_scale) << ",\"noise_level\":"
      << format_double(c.shift.noise_level) << ",\"groups\":" << c.groups
      << ",\"seed\":" << c.seed << ",\"tag\":\"" << to_string(c.tag) << "\"}\n";
}

Cohort read_cohort_jsonl(const std::filesystem::path& path) {
    Cohort cohort;
    {
        std::ifstream m(path.string() + ".manifest.json", std::ios::binary);
        if (!m) throw std::runtime_error("missing cohort manifest for " + path.string());
        nlohmann::json doc = nlohmann::json::parse(m);
        cohort.config.n_samples = doc.at("n_samples").get<std::size_t>();
        cohort.config.abnormal_fraction = doc.at("abnormal_fraction").get<double>();
        cohort.config.shift.contrast_gain = doc.at("contrast_gain").get<double>();
        cohort.config.shift.structure_scale = doc.at("structure_scale").get<double>();
        cohort.config.shift.noise_level = doc.at("noise_level").get<double>();
        cohort.config.groups = doc.at("groups").get<int>();
        cohort.config.seed = doc.at("seed").get<std::uint64_t>();
        cohort.config.tag = cohort_tag_from_string(doc.at("tag").get<std::string>());
    }
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        nlohmann::json doc = nlohmann::json::parse(line);
        Sample s;
        s.image = doc.at("image").get<std::vector<double>>();
        s.label = doc.at("label").get<int>();
        s.group_id = doc.at("group_id").get<int>();
        s.cohort = cohort_tag_from_string(doc.at("cohort").get<std::string>());
        cohort.samples.push_back(std::move(s));
    }
    return cohort;
}

}  // namespace weightlab
