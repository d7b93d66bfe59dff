#pragma once

#include <map>
#include <string>

#include "grpoqa/grpo.hpp"
#include "grpoqa/policy.hpp"

namespace grpoqa {

// Trainer hyperparameters plus toy policy geometry, resolved from a named
// profile and optionally overridden by a key-value config file section.
struct RunSetup {
    GrpoConfig grpo;
    int vocab_size = 21;
    int context_channels = 5;
    int embed_dim = 6;
    int window = 18;
    int hidden_dim = 24;
    double init_stddev = 0.08;

    static RunSetup profile(const std::string& name); // "paper-defaults" | "desk-scale"
    void apply_key(const std::string& key, const std::string& value);

    PolicyShape shape() const;
    Vocab vocab() const;
    void validate() const;
    std::string describe() const; // key=value lines, for manifests
};

// "key = value" lines grouped under "[section]" headers; '#' starts a comment
std::map<std::string, std::map<std::string, std::string>> parse_config_file(const std::string& path);

// Profile defaults, then the same-named section of the config file (when
// given) applied on top. Unknown keys are an error.
RunSetup load_run_setup(const std::string& config_path, const std::string& profile_name);

} // namespace grpoqa
