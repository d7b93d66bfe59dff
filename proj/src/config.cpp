#include "grpoqa/config.hpp"

#include <sstream>

#include "grpoqa/util.hpp"

namespace grpoqa {

RunSetup RunSetup::profile(const std::string& name) {
    RunSetup setup;
    if (name == "paper-defaults") {
        setup.grpo = GrpoConfig::paper_defaults();
    } else if (name == "desk-scale") {
        setup.grpo = GrpoConfig::desk_scale();
    } else {
        throw InputError("unknown profile: \"" + name + "\" (expected paper-defaults or desk-scale)");
    }
    return setup;
}

namespace {

long to_long(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing garbage");
        return v;
    } catch (const std::exception&) {
        throw InputError("config: bad integer for " + key + ": \"" + value + "\"");
    }
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing garbage");
        return v;
    } catch (const std::exception&) {
        throw InputError("config: bad number for " + key + ": \"" + value + "\"");
    }
}

} // namespace

void RunSetup::apply_key(const std::string& key, const std::string& value) {
    if (key == "group_size") grpo.group_size = int(to_long(key, value));
    else if (key == "clip_epsilon") grpo.clip_epsilon = to_double(key, value);
    else if (key == "kl_coeff") grpo.kl_coeff = to_double(key, value);
    else if (key == "learning_rate") grpo.learning_rate = to_double(key, value);
    else if (key == "temperature") grpo.temperature = to_double(key, value);
    else if (key == "total_steps") grpo.total_steps = int(to_long(key, value));
    else if (key == "accumulation_factor") grpo.accumulation_factor = int(to_long(key, value));
    else if (key == "micro_batch_size") grpo.micro_batch_size = int(to_long(key, value));
    else if (key == "inner_updates") grpo.inner_updates = int(to_long(key, value));
    else if (key == "std_guard") grpo.std_guard = to_double(key, value);
    else if (key == "max_response_len") grpo.max_response_len = int(to_long(key, value));
    else if (key == "rng_seed") grpo.rng_seed = std::uint64_t(to_long(key, value));
    else if (key == "checkpoint_interval") grpo.checkpoint_interval = int(to_long(key, value));
    else if (key == "vocab_size") vocab_size = int(to_long(key, value));
    else if (key == "context_channels") context_channels = int(to_long(key, value));
    else if (key == "embed_dim") embed_dim = int(to_long(key, value));
    else if (key == "window") window = int(to_long(key, value));
    else if (key == "hidden_dim") hidden_dim = int(to_long(key, value));
    else if (key == "init_stddev") init_stddev = to_double(key, value);
    else throw InputError("config: unknown key \"" + key + "\"");
}

PolicyShape RunSetup::shape() const {
    PolicyShape s;
    s.vocab_size = vocab_size;
    s.embed_dim = embed_dim;
    s.window = window;
    s.hidden_dim = hidden_dim;
    return s;
}

Vocab RunSetup::vocab() const {
    return Vocab(vocab_size, context_channels);
}

void RunSetup::validate() const {
    grpo.validate();
    shape().validate();
    (void)vocab();
    if (!(init_stddev >= 0.0)) throw InputError("config: init_stddev must be nonnegative");
}

std::string RunSetup::describe() const {
    std::ostringstream os;
    os << "group_size = " << grpo.group_size << '\n'
       << "clip_epsilon = " << grpo.clip_epsilon << '\n'
       << "kl_coeff = " << grpo.kl_coeff << '\n'
       << "learning_rate = " << grpo.learning_rate << '\n'
       << "temperature = " << grpo.temperature << '\n'
       << "total_steps = " << grpo.total_steps << '\n'
       << "accumulation_factor = " << grpo.accumulation_factor << '\n'
       << "micro_batch_size = " << grpo.micro_batch_size << '\n'
       << "inner_updates = " << grpo.inner_updates << '\n'
       << "std_guard = " << grpo.std_guard << '\n'
       << "max_response_len = " << grpo.max_response_len << '\n'
       << "rng_seed = " << grpo.rng_seed << '\n'
       << "checkpoint_interval = " << grpo.checkpoint_interval << '\n'
       << "vocab_size = " << vocab_size << '\n'
       << "context_channels = " << context_channels << '\n'
       << "embed_dim = " << embed_dim << '\n'
       << "window = " << window << '\n'
       << "hidden_dim = " << hidden_dim << '\n'
       << "init_stddev = " << init_stddev << '\n';
    return os.str();
}

std::map<std::string, std::map<std::string, std::string>> parse_config_file(const std::string& path) {
    std::map<std::string, std::map<std::string, std::string>> sections;
    const auto lines = split_lines(read_file(path));
    std::string current;
    for (std::size_t n = 0; n < lines.size(); ++n) {
        std::string line = lines[n];
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw ParseError(path + " line " + std::to_string(n + 1) + ": bad section header");
            }
            current = trim(line.substr(1, line.size() - 2));
            sections[current];
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(path + " line " + std::to_string(n + 1) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ParseError(path + " line " + std::to_string(n + 1) + ": empty key");
        }
        sections[current][key] = value;
    }
    return sections;
}

RunSetup load_run_setup(const std::string& config_path, const std::string& profile_name) {
    RunSetup setup = RunSetup::profile(profile_name);
    if (!config_path.empty()) {
        const auto sections = parse_config_file(config_path);
        const auto it = sections.find(profile_name);
        if (it != sections.end()) {
            for (const auto& [key, value] : it->second) setup.apply_key(key, value);
        }
    }
    setup.validate();
    return setup;
}

} // namespace grpoqa
