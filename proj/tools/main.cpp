// grpoqa command line: train / eval / ablate / generate / inspect.
// Exit codes: 0 success, 1 validation error, 2 runtime error, 3 external service.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "grpoqa/checkpoint.hpp"
#include "grpoqa/config.hpp"
#include "grpoqa/datagen.hpp"
#include "grpoqa/dataset.hpp"
#include "grpoqa/errors.hpp"
#include "grpoqa/eval.hpp"
#include "grpoqa/grpo.hpp"
#include "grpoqa/reward.hpp"
#include "grpoqa/rng.hpp"
#include "grpoqa/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace grpoqa;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string profile = "desk-scale";
    std::uint64_t seed = 0;
    std::string out_dir = "runs/out";
};

void write_run_manifest(const CommonOpts& opts, const RunSetup& setup,
                        const std::string& command,
                        const std::vector<std::pair<std::string, std::string>>& inputs) {
    json j;
    j["command"] = command;
    j["code_version"] = kVersionString;
    j["profile"] = opts.profile;
    j["seed"] = opts.seed;
    json cfg = json::object();
    for (const auto& line : split_lines(setup.describe())) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) cfg[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    j["config"] = cfg;
    json in = json::object();
    for (const auto& [name, path] : inputs) {
        in[name] = {{"path", path}, {"fnv1a64", to_hex(hash_file(path))}};
    }
    j["inputs"] = in;
    write_file_atomic((fs::path(opts.out_dir) / "manifest.json").string(), j.dump(2) + "\n");
}

Checkpoint train_one(const RunSetup& setup,
                     const std::vector<QAItem>& dataset, ModalityMode mode,
                     const std::string& out_dir, std::uint64_t seed) {
    const Vocab vocab = setup.vocab();
    Tokenizer tokenizer = build_tokenizer(vocab, dataset);
    PolicyParams params = PolicyParams::random_init(setup.shape(), derive_seed(seed, 0x1417), setup.init_stddev);

    GrpoConfig grpo_cfg = setup.grpo;
    grpo_cfg.rng_seed = seed;

    const PolicyParams ref = snapshot(params);
    save_checkpoint({vocab, ref, tokenizer.words()}, (fs::path(out_dir) / "ref.ckpt").string());

    const RolloutTask task = make_accuracy_task(tokenizer, mode);
    std::vector<TrainStats> stats;
    CheckpointSink sink = [&](const PolicyParams& p, int step) {
        const std::string name = step == grpo_cfg.total_steps ? "final.ckpt"
                                                              : "ckpt-" + std::to_string(step) + ".ckpt";
        save_checkpoint({vocab, p, tokenizer.words()}, (fs::path(out_dir) / name).string());
    };
    train_loop(params, dataset, grpo_cfg, task, sink, stats, 0, &ref);
    write_file_atomic((fs::path(out_dir) / "stats.tsv").string(), stats_to_tsv(stats));

    double tail_reward = 0.0;
    const std::size_t tail = std::min<std::size_t>(50, stats.size());
    for (std::size_t i = stats.size() - tail; i < stats.size(); ++i) tail_reward += stats[i].mean_reward;
    std::cout << "trained " << grpo_cfg.total_steps << " steps ("
              << modality_name(mode) << "); mean reward over last " << tail
              << " steps: " << (tail ? tail_reward / double(tail) : 0.0) << "\n";
    return Checkpoint{vocab, params, tokenizer.words()};
}

int cmd_train(const CommonOpts& opts, const std::string& dataset_path, const std::string& mode_name) {
    const RunSetup setup = load_run_setup(opts.config_path, opts.profile);
    const std::vector<QAItem> dataset = load_dataset(dataset_path);
    const ModalityMode mode = modality_from_name(mode_name);
    fs::create_directories(opts.out_dir);
    write_run_manifest(opts, setup, "train", {{"dataset", dataset_path}});
    train_one(setup, dataset, mode, opts.out_dir, opts.seed);
    std::cout << "final checkpoint: " << (fs::path(opts.out_dir) / "final.ckpt").string() << "\n";
    return 0;
}

EvalReport eval_checkpoint(const Checkpoint& ckpt, const std::vector<QAItem>& items,
                           ModalityMode mode, int max_response_len) {
    const Tokenizer tokenizer = ckpt.tokenizer();
    try {
        EvalOptions options;
        options.max_response_len = max_response_len;
        return evaluate(ckpt.params, tokenizer, items, mode, options);
    } catch (const InputError& e) {
        throw InputError(std::string("checkpoint/vocab mismatch: ") + e.what());
    }
}

int cmd_eval(const CommonOpts& opts, const std::string& ckpt_path, const std::string& dataset_path,
             const std::string& mode_name, const std::string& report_path, const std::string& split) {
    const RunSetup setup = load_run_setup(opts.config_path, opts.profile);
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    std::vector<QAItem> items = load_dataset(dataset_path);
    if (!split.empty()) {
        std::erase_if(items, [&](const QAItem& item) { return item.split != split; });
        if (items.empty()) throw InputError("no items with split \"" + split + "\"");
    }
    const ModalityMode mode = modality_from_name(mode_name);
    const EvalReport report = eval_checkpoint(ckpt, items, mode, setup.grpo.max_response_len);

    std::cout << report_table(report);
    if (!report_path.empty()) {
        write_file_atomic(report_path, report_to_json(report));
        std::cout << "report written to " << report_path << "\n";
    }
    return 0;
}

int cmd_ablate(const CommonOpts& opts, const std::string& train_with_path,
               const std::string& train_without_path, const std::string& benchmark_path) {
    const RunSetup setup = load_run_setup(opts.config_path, opts.profile);
    const std::vector<QAItem> train_with = load_dataset(train_with_path);
    const std::vector<QAItem> train_without =
        train_without_path.empty() ? train_with : load_dataset(train_without_path);
    const std::vector<QAItem> benchmark = load_dataset(benchmark_path);

    fs::create_directories(opts.out_dir);
    write_run_manifest(opts, setup, "ablate",
                       {{"train_with", train_with_path},
                        {"train_without", train_without_path.empty() ? train_with_path : train_without_path},
                        {"benchmark", benchmark_path}});

    struct Leg {
        const char* name;
        ModalityMode train_mode;
        const std::vector<QAItem>* data;
    };
    const Leg legs[2] = {{"ft_with_context", ModalityMode::with_context, &train_with},
                         {"ft_without_context", ModalityMode::without_context, &train_without}};
    const ModalityMode eval_modes[2] = {ModalityMode::with_context, ModalityMode::without_context};

    json summary;
    summary["cells"] = json::object();
    summary["deltas"] = json::object();
    std::ostringstream table;
    table << "ft_mode\tinfer_with_context\tinfer_without_context\n";
    table.setf(std::ios::fixed);
    table.precision(4);

    // both legs share the initialization seed so the comparison is paired
    const std::uint64_t leg_seed = derive_seed(opts.seed, 0xAB1);
    for (const Leg& leg : legs) {
        const std::string leg_dir = (fs::path(opts.out_dir) / leg.name).string();
        fs::create_directories(leg_dir);
        const Checkpoint trained = train_one(setup, *leg.data, leg.train_mode, leg_dir, leg_seed);

        EvalReport reports[2];
        for (int m = 0; m < 2; ++m) {
            reports[m] = eval_checkpoint(trained, benchmark, eval_modes[m], setup.grpo.max_response_len);
            const std::string rp = (fs::path(opts.out_dir) /
                                    (std::string(leg.name) + "-" + modality_name(eval_modes[m]) + ".json"))
                                       .string();
            write_file_atomic(rp, report_to_json(reports[m]));
            summary["cells"][leg.name][std::string("infer_") + modality_name(eval_modes[m])] =
                reports[m].overall_micro;
        }
        const ReportDelta delta = compare_reports(reports[0], reports[1]);
        summary["deltas"][leg.name] = json::parse(delta_to_json(delta));
        table << leg.name << '\t' << reports[0].overall_micro << '\t' << reports[1].overall_micro << '\n';
    }

    write_file_atomic((fs::path(opts.out_dir) / "summary.json").string(), summary.dump(2) + "\n");
    write_file_atomic((fs::path(opts.out_dir) / "summary.txt").string(), table.str());
    std::cout << table.str();
    std::cout << "ablation reports in " << opts.out_dir << "\n";
    return 0;
}

int cmd_generate(const CommonOpts& opts, const std::string& captions_path, bool mock,
                 GenClientConfig client_cfg, int max_total_tokens) {
    const RunSetup setup = load_run_setup(opts.config_path, opts.profile);
    const std::vector<CaptionRecord> captions = load_captions(captions_path);

    if (!mock) {
        if (client_cfg.endpoint.empty()) {
            throw InputError("generate: --endpoint required without --mock");
        }
        const char* key = std::getenv(client_cfg.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw InputError("generate: credential missing (set " + client_cfg.api_key_env +
                             ") or pass --mock");
        }
    }

    GenClient client = mock ? GenClient(client_cfg, mock_transport(opts.seed))
                            : GenClient(client_cfg);

    std::vector<GeneratedQA> generated;
    generated.reserve(captions.size());
    for (const auto& record : captions) {
        const std::string prompt = build_generation_prompt(record);
        const std::string raw = client.request_qa(prompt);
        GeneratedQA qa = parse_qa(raw, record.audio_id);
        qa.source = record;
        qa.meta.model = mock ? "mock" : client_cfg.model;
        generated.push_back(shuffle_answers(qa, opts.seed));
    }

    const Vocab vocab = setup.vocab();
    Tokenizer counter(vocab);
    FilterReport filter;
    const std::vector<GeneratedQA> kept = length_filter(generated, max_total_tokens, counter, &filter);

    fs::create_directories(opts.out_dir);
    const std::string dataset_path = (fs::path(opts.out_dir) / "dataset.jsonl").string();
    const std::string manifest_path = (fs::path(opts.out_dir) / "datagen-manifest.json").string();
    const ExportManifest manifest =
        export_dataset(kept, vocab, dataset_path, manifest_path, opts.seed, client_cfg.hash(), filter);

    std::cout << "generated " << generated.size() << " items, kept " << manifest.count
              << " after length filter (<= " << max_total_tokens << " tokens)\n";
    std::cout << "answer position balance:";
    for (int i = 0; i < 4; ++i) {
        const double freq = manifest.count > 0
                                ? double(manifest.position_counts[std::size_t(i)]) / manifest.count
                                : 0.0;
        std::cout << ' ' << freq;
    }
    std::cout << "\n";
    const auto flagged = flag_music_mentions(kept);
    std::cout << flagged.size() << " items mention music (review for caption hallucinations)\n";
    std::cout << "dataset written to " << dataset_path << "\n";
    return 0;
}

int inspect_dataset_lines(const std::vector<std::string>& lines, const std::string& path) {
    int violations = 0;
    int count = 0;
    std::map<std::string, int> categories;
    for (std::size_t n = 0; n < lines.size(); ++n) {
        if (trim(lines[n]).empty()) continue;
        try {
            const QAItem item = item_from_json_line(lines[n]);
            validate_item(item);
            ++count;
            ++categories[item.category];
        } catch (const std::exception& e) {
            std::cout << "line " << (n + 1) << ": " << e.what() << "\n";
            ++violations;
        }
    }
    std::cout << "dataset: " << count << " valid items";
    for (const auto& [cat, n] : categories) std::cout << ", " << cat << "=" << n;
    std::cout << "\n" << violations << " violations\n";
    (void)path;
    return violations == 0 ? 0 : 1;
}

int cmd_inspect(const std::string& path) {
    const std::string content = read_file(path);

    if (looks_like_checkpoint(content)) {
        try {
            const Checkpoint ckpt = checkpoint_from_string(content);
            std::cout << "checkpoint: vocab_size=" << ckpt.vocab.size
                      << " context_channels=" << ckpt.vocab.context_count
                      << " params=" << ckpt.params.flat.size()
                      << " version=" << ckpt.params.version
                      << " words=" << ckpt.words.size() << "\n0 violations\n";
            return 0;
        } catch (const std::exception& e) {
            std::cout << "checkpoint violation: " << e.what() << "\n";
            return 1;
        }
    }

    const std::string head = trim(content.substr(0, content.find('\n')));
    if (!head.empty() && head.front() == '{') {
        json j;
        try {
            j = json::parse(head);
        } catch (const json::exception&) {
            j = nullptr;
        }
        if (j.is_object() && j.contains("records")) {
            // evaluation report: recompute the overall accuracy from records
            int correct = 0, scored = 0;
            for (const auto& r : json::parse(content)["records"]) {
                if (r.value("skipped", false)) continue;
                ++scored;
                if (r.value("correct", false)) ++correct;
            }
            const double overall = json::parse(content).value("overall_micro", -1.0);
            const double recomputed = scored > 0 ? double(correct) / scored : 0.0;
            std::cout << "report: " << scored << " scored, overall_micro=" << overall << "\n";
            if (std::abs(overall - recomputed) > 1e-9) {
                std::cout << "violation: overall_micro inconsistent with records ("
                          << recomputed << " recomputed)\n";
                return 1;
            }
            std::cout << "0 violations\n";
            return 0;
        }
        if (j.is_object() && (j.contains("question") || j.contains("audio_id"))) {
            return inspect_dataset_lines(split_lines(content), path);
        }
    }
    throw InputError(path + ": unrecognized format");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"GRPO fine-tuning pipeline for multiple-choice QA over a toy policy"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersionString));

    CommonOpts opts;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opts.config_path, "key-value config file");
        cmd->add_option("--profile", opts.profile, "paper-defaults | desk-scale")
            ->default_val("desk-scale");
        cmd->add_option("--seed", opts.seed, "rng seed");
        cmd->add_option("--out", opts.out_dir, "output directory");
    };

    std::string dataset_path, mode_name = "with_context";
    auto* train = app.add_subcommand("train", "GRPO fine-tuning on a QAItem dataset");
    add_common(train);
    train->add_option("--dataset", dataset_path, "QAItem json-lines file")->required();
    train->add_option("--mode", mode_name, "with_context | without_context");

    std::string ckpt_path, report_path, split;
    auto* ev = app.add_subcommand("eval", "benchmark a checkpoint");
    add_common(ev);
    ev->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    ev->add_option("--dataset", dataset_path, "benchmark json-lines file")->required();
    ev->add_option("--mode", mode_name, "with_context | without_context");
    ev->add_option("--report-path", report_path, "JSON report output path");
    ev->add_option("--split", split, "only evaluate items with this split label");

    std::string train_without_path, benchmark_path;
    auto* ab = app.add_subcommand("ablate", "2x2 context ablation: fine-tune and evaluate with/without context");
    add_common(ab);
    ab->add_option("--dataset", dataset_path, "training dataset (with-context variant)")->required();
    ab->add_option("--dataset-without", train_without_path, "training dataset for the without-context leg");
    ab->add_option("--benchmark", benchmark_path, "evaluation dataset")->required();

    std::string captions_path;
    bool mock = false;
    int max_total_tokens = 256;
    GenClientConfig client_cfg;
    auto* gen = app.add_subcommand("generate", "generate a QA dataset from audio captions");
    add_common(gen);
    gen->add_option("--captions", captions_path, "caption json-lines file")->required();
    gen->add_flag("--mock", mock, "use the deterministic offline generator");
    gen->add_option("--endpoint", client_cfg.endpoint, "chat-completions endpoint URL");
    gen->add_option("--model", client_cfg.model, "model identifier");
    gen->add_option("--cache-dir", client_cfg.cache_dir, "response cache directory");
    gen->add_option("--max-retries", client_cfg.max_retries, "transient failure retries");
    gen->add_option("--timeout", client_cfg.timeout_seconds, "request timeout (seconds)");
    gen->add_option("--rate-limit", client_cfg.rate_limit_requests, "max requests per interval");
    gen->add_option("--max-total-tokens", max_total_tokens, "length filter threshold");

    std::string inspect_path;
    auto* ins = app.add_subcommand("inspect", "validate a dataset, report or checkpoint");
    ins->add_option("path", inspect_path, "file to inspect")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1; // usage problems are validation errors
    }

    try {
        if (train->parsed()) return cmd_train(opts, dataset_path, mode_name);
        if (ev->parsed()) return cmd_eval(opts, ckpt_path, dataset_path, mode_name, report_path, split);
        if (ab->parsed()) return cmd_ablate(opts, dataset_path, train_without_path, benchmark_path);
        if (gen->parsed()) return cmd_generate(opts, captions_path, mock, client_cfg, max_total_tokens);
        if (ins->parsed()) return cmd_inspect(inspect_path);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const TransportError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ServiceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
