#include "weightlab/weight_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace weightlab {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

void append_array(std::string& out, const std::vector<double>& values) {
    out += '[';
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += format_double(values[i]);
    }
    out += ']';
}

void append_shape(std::string& out, const std::vector<std::size_t>& shape) {
    out += '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(shape[i]);
    }
    out += ']';
}

}  // namespace

std::string weight_set_to_json(const NetworkSpec& spec, const WeightSet& weights) {
    validate_weights(spec, weights);
    std::string out = "{\"spec_hash\":\"";
    char hex[20];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(spec_hash(spec)));
    out += hex;
    out += "\",\"layers\":[";
    for (std::size_t i = 0; i < weights.entries.size(); ++i) {
        const WeightEntry& e = weights.entries[i];
        if (i) out += ',';
        out += "{\"index\":" + std::to_string(e.layer_index) + ",\"kernel_shape\":";
        append_shape(out, e.kernel.shape);
        out += ",\"kernel\":";
        append_array(out, e.kernel.values);
        out += ",\"bias_shape\":";
        append_shape(out, e.bias.shape);
        out += ",\"bias\":";
        append_array(out, e.bias.values);
        out += '}';
    }
    out += "]}";
    return out;
}

void save_weight_set(const std::filesystem::path& path, const NetworkSpec& spec,
                     const WeightSet& weights) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f << weight_set_to_json(spec, weights) << '\n';
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

WeightSet weight_set_from_json(const std::string& json_text, const NetworkSpec& expected_spec) {
    nlohmann::json doc = nlohmann::json::parse(json_text);
    char hex[20];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(spec_hash(expected_spec)));
    if (doc.at("spec_hash").get<std::string>() != hex) {
        throw std::runtime_error("weight set spec_hash does not match the expected architecture");
    }
    WeightSet w;
    for (const auto& layer : doc.at("layers")) {
        WeightEntry e;
        e.layer_index = layer.at("index").get<int>();
        e.kernel.shape = layer.at("kernel_shape").get<std::vector<std::size_t>>();
        e.kernel.values = layer.at("kernel").get<std::vector<double>>();
        e.bias.shape = layer.at("bias_shape").get<std::vector<std::size_t>>();
        e.bias.values = layer.at("bias").get<std::vector<double>>();
        w.entries.push_back(std::move(e));
    }
    validate_weights(expected_spec, w);
    return w;
}

WeightSet load_weight_set(const std::filesystem::path& path, const NetworkSpec& expected_spec) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return weight_set_from_json(ss.str(), expected_spec);
}

}  // namespace weightlab
