#include "cars/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace cars {

using nlohmann::json;

namespace {

const std::set<std::string> kObjectiveNames = {"error", "params", "flops", "latency"};

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

json space_to_json(const SpaceDescriptor& s) {
    json j;
    std::vector<std::string> ops;
    for (OpKind k : s.op_set) ops.emplace_back(op_name(k));
    j["op_set"] = ops;
    j["node_count"] = s.node_count;
    j["input_count"] = s.input_count;
    j["stack_depth"] = s.stack_depth;
    j["reduction_positions"] = s.reduction_positions;
    j["stem_channels"] = s.stem_channels;
    return j;
}

SpaceDescriptor space_from_json(const json& j) {
    reject_unknown(j,
                   {"op_set", "node_count", "input_count", "stack_depth", "reduction_positions",
                    "stem_channels"},
                   "space");
    SpaceDescriptor s = SpaceDescriptor::default_desk();
    if (j.contains("op_set")) {
        s.op_set.clear();
        for (const auto& name : j["op_set"]) s.op_set.push_back(op_from_name(name));
    }
    if (j.contains("node_count")) s.node_count = j["node_count"].get<int>();
    if (j.contains("input_count")) s.input_count = j["input_count"].get<int>();
    if (j.contains("stack_depth")) s.stack_depth = j["stack_depth"].get<int>();
    if (j.contains("reduction_positions"))
        s.reduction_positions = j["reduction_positions"].get<std::vector<int>>();
    if (j.contains("stem_channels")) s.stem_channels = j["stem_channels"].get<int>();
    return s;
}

json dataset_to_json(const DatasetSpec& d) {
    json j;
    j["source"] = d.source == DatasetSpec::Source::synthetic ? "synthetic" : "cifar10_binary";
    j["cifar_dir"] = d.cifar_dir;
    j["synthetic"] = {{"classes", d.synthetic.classes},
                      {"samples", d.synthetic.samples},
                      {"image_size", d.synthetic.image_size},
                      {"noise", d.synthetic.noise},
                      {"seed", d.synthetic.seed}};
    j["param_fraction"] = d.param_fraction;
    j["arch_fraction"] = d.arch_fraction;
    j["batch_size"] = d.batch_size;
    j["flip"] = d.flip;
    j["crop"] = d.crop;
    return j;
}

DatasetSpec dataset_from_json(const json& j) {
    reject_unknown(j,
                   {"source", "cifar_dir", "synthetic", "param_fraction", "arch_fraction",
                    "batch_size", "flip", "crop"},
                   "dataset");
    DatasetSpec d;
    if (j.contains("source")) {
        const std::string s = j["source"].get<std::string>();
        if (s == "synthetic") {
            d.source = DatasetSpec::Source::synthetic;
        } else if (s == "cifar10_binary") {
            d.source = DatasetSpec::Source::cifar10_binary;
        } else {
            throw ConfigError("dataset source must be 'synthetic' or 'cifar10_binary'");
        }
    }
    if (j.contains("cifar_dir")) d.cifar_dir = j["cifar_dir"].get<std::string>();
    if (j.contains("synthetic")) {
        const json& sj = j["synthetic"];
        reject_unknown(sj, {"classes", "samples", "image_size", "noise", "seed"},
                       "dataset.synthetic");
        if (sj.contains("classes")) d.synthetic.classes = sj["classes"].get<int>();
        if (sj.contains("samples")) d.synthetic.samples = sj["samples"].get<int>();
        if (sj.contains("image_size")) d.synthetic.image_size = sj["image_size"].get<int>();
        if (sj.contains("noise")) d.synthetic.noise = sj["noise"].get<double>();
        if (sj.contains("seed")) d.synthetic.seed = sj["seed"].get<uint64_t>();
    }
    if (j.contains("param_fraction")) d.param_fraction = j["param_fraction"].get<double>();
    if (j.contains("arch_fraction")) d.arch_fraction = j["arch_fraction"].get<double>();
    if (j.contains("batch_size")) d.batch_size = j["batch_size"].get<int>();
    if (j.contains("flip")) d.flip = j["flip"].get<bool>();
    if (j.contains("crop")) d.crop = j["crop"].get<bool>();
    return d;
}

} // namespace

void EvolutionConfig::validate(bool resuming) const {
    if (population < 2) throw ConfigError("population must be >= 2");
    if (expand_ratio < 1) throw ConfigError("expand_ratio (t) must be >= 1");
    if (arch_minibatch < 1 || arch_minibatch > population)
        throw ConfigError("arch_minibatch (B) must be in [1, population]");
    if (warmup_epochs < 1 && !resuming)
        throw ConfigError("warmup_epochs must be >= 1 unless resuming from a checkpoint");
    if (warmup_epochs < 0) throw ConfigError("warmup_epochs must be >= 0");
    if (evolution_generations < 1) throw ConfigError("evolution_generations must be >= 1");
    if (param_epochs < 1) throw ConfigError("param_epochs must be >= 1");
    if (lr <= 0.0) throw ConfigError("lr must be positive");
    if (lr_min < 0.0 || lr_min > lr) throw ConfigError("lr_min must be in [0, lr]");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (eval_batch_size < 1) throw ConfigError("eval_batch_size must be >= 1");
    if (dataset.batch_size < 1) throw ConfigError("dataset.batch_size must be >= 1");
    if (dataset.param_fraction <= 0.0 || dataset.arch_fraction <= 0.0 ||
        std::abs(dataset.param_fraction + dataset.arch_fraction - 1.0) > 1e-9)
        throw ConfigError("dataset split fractions must be positive and sum to 1");
    if (objectives.size() < 2) throw ConfigError("need at least 2 objectives");
    if (objectives.front() != "error") throw ConfigError("first objective must be 'error'");
    std::set<std::string> seen;
    for (const auto& name : objectives) {
        if (!kObjectiveNames.count(name)) throw ConfigError("unknown objective: " + name);
        if (!seen.insert(name).second) throw ConfigError("duplicate objective: " + name);
    }
    space.validate();
    if (dataset.source == DatasetSpec::Source::cifar10_binary && dataset.cifar_dir.empty())
        throw ConfigError("cifar10_binary source needs dataset.cifar_dir");
}

NetShape EvolutionConfig::net_shape() const {
    NetShape shape;
    if (dataset.source == DatasetSpec::Source::synthetic) {
        shape.in_channels = 1;
        shape.num_classes = dataset.synthetic.classes;
        shape.height = dataset.synthetic.image_size;
        shape.width = dataset.synthetic.image_size;
    } else {
        shape.in_channels = 3;
        shape.num_classes = 10;
        shape.height = 32;
        shape.width = 32;
    }
    return shape;
}

std::string EvolutionConfig::to_json_text() const {
    json j;
    j["population"] = population;
    j["expand_ratio"] = expand_ratio;
    j["arch_minibatch"] = arch_minibatch;
    j["warmup_epochs"] = warmup_epochs;
    j["evolution_generations"] = evolution_generations;
    j["param_epochs"] = param_epochs;
    j["lr"] = lr;
    j["lr_min"] = lr_min;
    j["cosine_lr"] = cosine_lr;
    j["momentum"] = momentum;
    j["weight_decay"] = weight_decay;
    j["seed"] = seed;
    j["eval_batch_size"] = eval_batch_size;
    j["objectives"] = objectives;
    j["latency_lut_path"] = latency_lut_path;
    j["space"] = space_to_json(space);
    j["dataset"] = dataset_to_json(dataset);
    return j.dump(2);
}

EvolutionConfig EvolutionConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown(j,
                   {"population", "expand_ratio", "arch_minibatch", "warmup_epochs",
                    "evolution_generations", "param_epochs", "lr", "lr_min", "cosine_lr",
                    "momentum", "weight_decay", "seed", "eval_batch_size", "objectives",
                    "latency_lut_path", "space", "dataset"},
                   "config");
    EvolutionConfig c;
    try {
        if (j.contains("population")) c.population = j["population"].get<int>();
        if (j.contains("expand_ratio")) c.expand_ratio = j["expand_ratio"].get<int>();
        if (j.contains("arch_minibatch")) c.arch_minibatch = j["arch_minibatch"].get<int>();
        if (j.contains("warmup_epochs")) c.warmup_epochs = j["warmup_epochs"].get<int>();
        if (j.contains("evolution_generations"))
            c.evolution_generations = j["evolution_generations"].get<int>();
        if (j.contains("param_epochs")) c.param_epochs = j["param_epochs"].get<int>();
        if (j.contains("lr")) c.lr = j["lr"].get<double>();
        if (j.contains("lr_min")) c.lr_min = j["lr_min"].get<double>();
        if (j.contains("cosine_lr")) c.cosine_lr = j["cosine_lr"].get<bool>();
        if (j.contains("momentum")) c.momentum = j["momentum"].get<double>();
        if (j.contains("weight_decay")) c.weight_decay = j["weight_decay"].get<double>();
        if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
        if (j.contains("eval_batch_size")) c.eval_batch_size = j["eval_batch_size"].get<int>();
        if (j.contains("objectives")) c.objectives = j["objectives"].get<std::vector<std::string>>();
        if (j.contains("latency_lut_path"))
            c.latency_lut_path = j["latency_lut_path"].get<std::string>();
        if (j.contains("space")) c.space = space_from_json(j["space"]);
        if (j.contains("dataset")) c.dataset = dataset_from_json(j["dataset"]);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    return c;
}

EvolutionConfig EvolutionConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text);
}

void EvolutionConfig::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config file: " + path);
    out << to_json_text() << '\n';
}

EvolutionConfig EvolutionConfig::desk_default() {
    EvolutionConfig c;
    c.space.node_count = 2;
    c.space.stack_depth = 3;
    c.space.reduction_positions = {1};
    return c;
}

EvolutionConfig EvolutionConfig::paper_cifar10() {
    EvolutionConfig c;
    c.population = 128;
    c.expand_ratio = 1;
    c.arch_minibatch = 1;
    c.warmup_epochs = 50;
    c.evolution_generations = 45;
    c.param_epochs = 10;
    c.lr = 0.025;
    c.space = SpaceDescriptor::darts8();
    c.space.node_count = 4;
    c.space.stack_depth = 8;
    c.space.reduction_positions = {2, 5};
    c.space.stem_channels = 16;
    c.dataset.source = DatasetSpec::Source::cifar10_binary;
    c.dataset.cifar_dir = "data/cifar-10-batches-bin";
    c.dataset.batch_size = 128;
    c.dataset.flip = true;
    c.dataset.crop = true;
    return c;
}

} // namespace cars
