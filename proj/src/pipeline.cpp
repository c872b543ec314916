#include "srcplan/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "srcplan/analysis.hpp"
#include "srcplan/baselines.hpp"
#include "srcplan/condlm.hpp"
#include "srcplan/corpus.hpp"
#include "srcplan/criticism.hpp"
#include "srcplan/error.hpp"
#include "srcplan/log.hpp"
#include "srcplan/predictor.hpp"
#include "srcplan/rng.hpp"
#include "srcplan/stm.hpp"
#include "srcplan/synth.hpp"

namespace fs = std::filesystem;

namespace srcplan {

const std::vector<std::string_view>& known_config_keys() {
    static const std::vector<std::string_view> keys = {
        "run_dir", "corpus", "registry", "schemata", "seed", "min_sources",
        "lm.order", "lm.alpha", "lm.lambda",
        "negprompt.gamma", "negprompt.seed",
        "baseline.seed", "baseline.vector_dim", "baseline.min_df", "baseline.max_iter", "baseline.idf_smooth",
        "noise.accuracies", "noise.target", "noise.apply",
        "pp.top_k", "pp.seed", "pp.bootstrap", "pp.l2", "pp.epochs", "pp.lr",
        "stm.doc_types", "stm.source_types", "stm.topics", "stm.h_T", "stm.h_S", "stm.h_z", "stm.h_w",
        "stm.sweeps", "stm.burn_in", "stm.thin", "stm.seed", "stm.chains",
        "affinity.schema_a", "affinity.schema_b", "affinity.top_n", "affinity.min_support",
        "affinity.min_difference",
        "predict.min_df", "predict.seed", "predict.l2", "predict.epochs", "predict.lr",
        "synth.mode", "synth.n_docs", "synth.sources_per_doc", "synth.tokens_per_source",
        "synth.background_tokens", "synth.sentence_len", "synth.separation", "synth.keyword_link",
        "synth.label_mode", "synth.label_cue", "synth.planted_schema", "synth.private_block",
        "synth.shared_block", "synth.headline_noise", "synth.eval_every", "synth.concentration", "synth.seed",
    };
    return keys;
}

const std::vector<std::string_view>& stage_names() {
    static const std::vector<std::string_view> names = {"synth", "train-lm", "baseline", "ppl",     "posterior",
                                                         "stm",   "select",   "affinity", "cramers", "predict",
                                                         "report"};
    return names;
}

namespace {

std::uint64_t stage_seed(const Config& c, const std::string& stage) {
    return c.get_u64(stage + ".seed", derive_seed(c.get_u64("seed", 0), stage));
}

// Safe file stem for a schema name.
std::string stem(const std::string& name) {
    std::string out;
    for (char ch : name) out += std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' ? ch : '_';
    return out;
}

std::string num(double x) { return format_number(x, 6); }

double parse_num(const std::string& s) {
    if (s == "nan" || s.empty()) return std::nan("");
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw DataError("expected a number, got '" + s + "'");
    }
}

std::size_t column(const Table& t, std::string_view name, const fs::path& path) {
    auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) throw DataError(path.string() + ": missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - t.header.begin());
}

fs::path require(const fs::path& path, std::string_view producer) {
    if (!fs::exists(path))
        throw DataError(path.string() + " not found; run the '" + std::string(producer) + "' stage first");
    return path;
}

void emit(const RunContext& ctx, const fs::path& rel, const Table& table, bool markdown = false) {
    write_text(ctx.run_dir / rel, to_csv(table, ctx.meta));
    if (markdown) {
        fs::path md = ctx.run_dir / rel;
        md.replace_extension(".md");
        std::string header;
        for (const auto& [k, v] : ctx.meta) header += "<!-- " + k + ": " + v + " -->\n";
        write_text(md, header + to_markdown(table));
    }
}

NGramParams lm_params(const Config& c) {
    NGramParams p;
    p.order = c.get_size("lm.order", p.order);
    p.alpha = c.get_double("lm.alpha", p.alpha);
    p.lambda = c.get_double("lm.lambda", p.lambda);
    return p;
}

NegPromptConfig negprompt(const Config& c) {
    NegPromptConfig n;
    n.gamma = c.get_double("negprompt.gamma", n.gamma);
    n.shuffle_seed = stage_seed(c, "negprompt");
    n.validate();
    return n;
}

StmConfig stm_config(const Config& c) {
    StmConfig s;
    s.n_doc_types = c.get_size("stm.doc_types", s.n_doc_types);
    s.n_source_types = c.get_size("stm.source_types", s.n_source_types);
    s.n_topics = c.get_size("stm.topics", s.n_topics);
    s.h_T = c.get_double("stm.h_T", s.h_T);
    s.h_S = c.get_double("stm.h_S", s.h_S);
    s.h_z = c.get_double("stm.h_z", s.h_z);
    s.h_w = c.get_double("stm.h_w", s.h_w);
    s.sweeps = c.get_size("stm.sweeps", s.sweeps);
    s.burn_in = c.get_size("stm.burn_in", s.burn_in);
    s.thin = c.get_size("stm.thin", s.thin);
    s.store_word_topics = false;
    s.seed = stage_seed(c, "stm");
    return s;
}

LogRegParams logreg_params(const Config& c, const std::string& prefix) {
    LogRegParams p;
    p.l2 = c.get_double(prefix + ".l2", p.l2);
    p.epochs = c.get_size(prefix + ".epochs", p.epochs);
    p.lr = c.get_double(prefix + ".lr", p.lr);
    return p;
}

EmbeddingConfig embedding_config(const Config& c) {
    EmbeddingConfig e;
    e.vector_dim = c.get_size("baseline.vector_dim", e.vector_dim);
    e.min_df = c.get_size("baseline.min_df", e.min_df);
    e.idf_smooth = c.get_bool("baseline.idf_smooth", e.idf_smooth);
    return e;
}

SynthSpec synth_spec(const Config& c) {
    SynthSpec s;
    s.mode = synth_mode_from_string(c.get_string("synth.mode", "planted-schema"));
    s.n_docs = c.get_size("synth.n_docs", s.n_docs);
    s.sources_per_doc = c.get_size("synth.sources_per_doc", s.sources_per_doc);
    s.tokens_per_source = c.get_size("synth.tokens_per_source", s.tokens_per_source);
    s.background_tokens = c.get_size("synth.background_tokens", s.background_tokens);
    s.sentence_len = c.get_size("synth.sentence_len", s.sentence_len);
    s.separation = c.get_double("synth.separation", s.separation);
    s.keyword_link = c.get_bool("synth.keyword_link", s.keyword_link);
    const auto lm = c.get_string("synth.label_mode", "independent");
    if (lm == "independent") {
        s.label_mode = LabelMode::independent;
    } else if (lm == "document-shared") {
        s.label_mode = LabelMode::document_shared;
    } else {
        throw UsageError("synth.label_mode must be independent or document-shared");
    }
    s.label_cue = c.get_bool("synth.label_cue", s.label_cue);
    s.planted_schema = c.get_string("synth.planted_schema", s.planted_schema);
    s.private_block_size = c.get_size("synth.private_block", s.private_block_size);
    s.shared_block_size = c.get_size("synth.shared_block", s.shared_block_size);
    s.headline_noise_tokens = c.get_size("synth.headline_noise", s.headline_noise_tokens);
    s.eval_every = c.get_size("synth.eval_every", s.eval_every);
    s.type_concentration = c.get_double("synth.concentration", s.type_concentration);
    s.stm = stm_config(c);
    s.seed = stage_seed(c, "synth");
    return s;
}

struct Inputs {
    Corpus corpus;
    SchemaRegistry registry;
    std::vector<SchemaDef> schemata;
};

fs::path corpus_path(const RunContext& ctx) {
    return ctx.config.has("corpus") ? fs::path(ctx.config.get_string("corpus", "")) : ctx.run_dir / "corpus.jsonl";
}

LabelingSet labelings_of(const Corpus& corpus, const SchemaDef& def) {
    LabelingSet labs = corpus.labelings_for(def.name);
    if (labs.empty()) labs = aggregate_sentence_labels(corpus, def.name, sentence_label_prior(corpus, def.name));
    return labs;
}

// "noise.accuracies = Role:0.91, Affiliation:0.78": each schema's labeler accuracy.
std::map<std::string, double> noise_accuracies(const Config& c) {
    std::map<std::string, double> out;
    for (const auto& item : c.get_list("noise.accuracies")) {
        const auto colon = item.rfind(':');
        double acc = std::nan("");
        if (colon != std::string::npos) {
            try {
                acc = std::stod(item.substr(colon + 1));
            } catch (const std::exception&) {
            }
        }
        if (!(acc > 0.0 && acc <= 1.0))
            throw UsageError("noise.accuracies: expected schema:accuracy in (0, 1], got '" + item + "'");
        out[item.substr(0, colon)] = acc;
    }
    return out;
}

// Defaults to the least accurate labeler, so every schema is brought down to it.
double noise_target(const Config& c, const std::map<std::string, double>& acc) {
    double lo = 1.0;
    for (const auto& [_, a] : acc) lo = std::min(lo, a);
    return c.get_double("noise.target", lo);
}

fs::path noised_path(const RunContext& ctx, const std::string& schema) {
    return ctx.run_dir / "labelings" / ("noised_" + stem(schema) + ".jsonl");
}

Inputs load_inputs(const RunContext& ctx, bool need_schemata = true, bool apply_noise = true) {
    Inputs in;
    if (ctx.config.has("registry")) {
        in.registry = load_registry(ctx.config.get_string("registry", ""));
    } else if (fs::exists(ctx.run_dir / "registry.json")) {
        in.registry = load_registry(ctx.run_dir / "registry.json");
    } else {
        in.registry = default_registry();
    }
    in.corpus = load_corpus(require(corpus_path(ctx), "synth"), &in.registry);
    if (const std::size_t m = ctx.config.get_size("min_sources", 0); m > 0) in.corpus = filter_min_sources(in.corpus, m);

    if (!need_schemata) return in;
    auto names = ctx.config.get_list("schemata");
    if (names.empty()) {
        for (const auto& def : in.registry.schemata())
            if (!labelings_of(in.corpus, def).empty()) names.push_back(def.name);
    }
    if (names.empty()) throw DataError("no registered schema has labels in the corpus");
    for (const auto& n : names) {
        const SchemaDef* def = in.registry.find(n);
        if (!def) throw DataError("schema '" + n + "' is not in the registry");
        in.schemata.push_back(*def);
    }
    if (apply_noise && ctx.config.get_bool("noise.apply", false)) {
        const auto acc = noise_accuracies(ctx.config);
        for (const auto& def : in.schemata) {
            if (!acc.contains(def.name)) continue;
            for (auto& [doc, lab] : load_labelings(require(noised_path(ctx, def.name), "baseline")))
                in.corpus.labelings[{doc, def.name}] = std::move(lab);
        }
    }
    return in;
}

fs::path baseline_path(const RunContext& ctx, const std::string& name, std::size_t k) {
    return ctx.run_dir / "labelings" / (name + "_k" + std::to_string(k) + ".jsonl");
}

const std::vector<std::string> kBaselines = {"base-k", "base-r"};

// ---- stages ---------------------------------------------------------------

void stage_synth(const RunContext& ctx) {
    auto spec = synth_spec(ctx.config);
    auto r = generate_corpus(spec);
    save_corpus(r.corpus, ctx.run_dir / "corpus.jsonl");
    if (!r.registry.empty()) save_registry(r.registry, ctx.run_dir / "registry.json");
    save_ground_truth(r.ground_truth, ctx.run_dir / "ground_truth.json");
    log_info("synth: wrote " + std::to_string(r.corpus.documents.size()) + " documents");
}

void stage_train_lm(const RunContext& ctx) {
    auto in = load_inputs(ctx);
    const auto params = lm_params(ctx.config);
    for (const auto& def : in.schemata) {
        auto model = ConditionalNGram::train(in.corpus, def, labelings_of(in.corpus, def), params);
        fs::create_directories(ctx.run_dir / "models");
        model.save(ctx.run_dir / "models" / ("lm_" + stem(def.name) + ".json"));
    }
}

void stage_baseline(const RunContext& ctx) {
    auto in = load_inputs(ctx, true, false);
    const std::uint64_t seed = stage_seed(ctx.config, "baseline");
    const auto emb = embedding_config(ctx.config);
    const std::size_t max_iter = ctx.config.get_size("baseline.max_iter", 100);
    std::set<std::size_t> ks;
    for (const auto& def : in.schemata) ks.insert(def.size());
    Table t{{"baseline", "k", "inertia", "iterations", "swap_p"}, {}};
    for (std::size_t k : ks) {
        fs::create_directories(ctx.run_dir / "labelings");
        save_labelings(random_labelings(in.corpus, k, derive_seed(seed, "base-r" + std::to_string(k))),
                       baseline_path(ctx, "base-r", k));
        auto km = kmeans_labeling(in.corpus, k, emb, derive_seed(seed, "base-k" + std::to_string(k)), max_iter);
        save_labelings(km.labelings, baseline_path(ctx, "base-k", k));
        t.rows.push_back({"base-k", std::to_string(k), num(km.clusters.inertia), std::to_string(km.clusters.iterations), ""});
        t.rows.push_back({"base-r", std::to_string(k), "", "", ""});
    }
    const auto acc = noise_accuracies(ctx.config);
    const double target = noise_target(ctx.config, acc);
    for (const auto& def : in.schemata) {
        auto it = acc.find(def.name);
        if (it == acc.end()) continue;
        LabelingSet noised;
        for (const auto& [doc, lab] : labelings_of(in.corpus, def))
            noised[doc] = noise_equalize(lab, def, it->second, target, derive_seed(seed, "noise:" + def.name + ":" + doc));
        fs::create_directories(ctx.run_dir / "labelings");
        save_labelings(noised, noised_path(ctx, def.name));
        t.rows.push_back({"noised:" + def.name, std::to_string(def.size()), "", "",
                          num(noise_probability(it->second, target, def.size()))});
    }
    emit(ctx, "labelings/summary.csv", t);
}

void stage_ppl(const RunContext& ctx) {
    auto in = load_inputs(ctx);
    const auto np = negprompt(ctx.config);
    Table per_doc{{"schema", "doc_id", "split", "ppl"}, {}};
    Table summary{{"schema", "k", "n_eval", "mean_ppl", "base_k_mean", "delta_base_k", "p_base_k", "base_r_mean",
                   "delta_base_r", "p_base_r"},
                  {}};
    for (const auto& def : in.schemata) {
        auto model = ConditionalNGram::load(require(ctx.run_dir / "models" / ("lm_" + stem(def.name) + ".json"), "train-lm"));
        const auto labs = labelings_of(in.corpus, def);
        std::vector<BaselineGenerator> gens;
        for (const auto& b : kBaselines)
            gens.push_back({b, [&ctx, b](const Corpus&, std::size_t k) {
                                return load_labelings(require(baseline_path(ctx, b, k), "baseline"));
                            }});
        auto rep = schema_perplexity_report(in.corpus, def, model, labs, gens, np);
        auto train_ppl = crossfit_perplexities(in.corpus, def, labs, model.params(), np);
        for (const auto& [doc, v] : train_ppl) per_doc.rows.push_back({def.name, doc, "train", num(v)});
        std::vector<double> eval_values;
        for (const auto& [doc, v] : rep.per_document) {
            per_doc.rows.push_back({def.name, doc, "eval", num(v)});
            eval_values.push_back(v);
        }
        summary.rows.push_back({def.name, std::to_string(def.size()), std::to_string(rep.per_document.size()),
                                num(rep.mean), num(rep.baseline_mean.at("base-k")),
                                num(rep.delta_vs_baseline.at("base-k")), num(rep.t_test_p.at("base-k")),
                                num(rep.baseline_mean.at("base-r")), num(rep.delta_vs_baseline.at("base-r")),
                                num(rep.t_test_p.at("base-r"))});
        write_text(ctx.run_dir / "ppl" / ("hist_" + stem(def.name) + ".svg"),
                   svg_histogram("Eval perplexity: " + def.name, eval_values));
    }
    emit(ctx, "ppl/per_document.csv", per_doc);
    emit(ctx, "ppl/summary.csv", summary, true);
}

void stage_posterior(const RunContext& ctx) {
    auto in = load_inputs(ctx);
    const std::uint64_t seed = stage_seed(ctx.config, "pp");
    const std::size_t top_k = ctx.config.get_size("pp.top_k", 4);
    const std::size_t boot = ctx.config.get_size("pp.bootstrap", 500);
    const auto params = logreg_params(ctx.config, "pp");
    auto run = [&](const SchemaDef& def, const LabelingSet& labs, const std::string& name) {
        auto set = build_pp_instances(in.corpus, def, labs, top_k, seed);
        if (set.train.empty() || set.eval.empty())
            throw DataError("posterior: no held-out instances for '" + name + "' (documents need 2+ sources)");
        auto clf = train_pp_classifier(set, params);
        return evaluate_pp_f1(clf, set.eval, boot, seed, name);
    };
    Table summary{{"schema", "k", "n_eval", "f1", "base_k_f1", "ratio_base_k", "p_base_k", "base_r_f1",
                   "ratio_base_r", "p_base_r"},
                  {}};
    for (const auto& def : in.schemata) {
        auto rep = run(def, labelings_of(in.corpus, def), def.name);
        for (const auto& b : kBaselines) {
            auto labs = load_labelings(require(baseline_path(ctx, b, def.size()), "baseline"));
            std::set<std::string> ids;
            for (const auto& [_, lab] : labs)
                for (const auto& [__, l] : lab.assignments) ids.insert(l);
            SchemaDef bdef{def.name + "#" + b, {ids.begin(), ids.end()}};
            compare_pp(rep, b, run(bdef, labs, bdef.name));
        }
        summary.rows.push_back({def.name, std::to_string(def.size()), std::to_string(rep.n_eval), num(rep.micro_f1),
                                num(rep.baseline_f1.at("base-k")), num(rep.ratio_vs_baseline.at("base-k")),
                                num(rep.bootstrap_p.at("base-k")), num(rep.baseline_f1.at("base-r")),
                                num(rep.ratio_vs_baseline.at("base-r")), num(rep.bootstrap_p.at("base-r"))});
    }
    emit(ctx, "posterior/summary.csv", summary, true);
}

std::vector<std::size_t> truth_vector(const nlohmann::json& truth_by_doc, const GibbsState& st, bool sources) {
    std::vector<std::size_t> out;
    for (std::size_t d = 0; d < st.n_docs(); ++d) {
        const auto& rec = truth_by_doc.at(st.doc_id(d));
        if (!sources) {
            out.push_back(rec.at("doc_type").get<std::size_t>());
        } else {
            for (std::size_t s = 0; s < st.n_sources(d); ++s)
                out.push_back(rec.at("source_types").at(st.source_id(d, s)).get<std::size_t>());
        }
    }
    return out;
}

void stage_stm(const RunContext& ctx) {
    auto in = load_inputs(ctx, false);
    const auto base = stm_config(ctx.config);
    const std::size_t chains = ctx.config.get_size("stm.chains", 3);
    const auto mask = build_switch_mask(in.corpus);

    // Ground truth is only available for stm-story synthetic corpora.
    nlohmann::json truth_by_doc;
    if (fs::exists(ctx.run_dir / "ground_truth.json")) {
        auto truth = nlohmann::json::parse(read_text(ctx.run_dir / "ground_truth.json"));
        if (truth.value("mode", "") == "stm-story")
            for (const auto& d : truth.at("documents")) truth_by_doc[d.at("doc_id").get<std::string>()] = d;
    }

    Table summary{{"chain", "seed", "sweeps", "samples", "final_log_joint", "doc_type_acc", "source_type_acc"}, {}};
    Table assign{{"chain", "doc_id", "source_id", "doc_type", "source_type"}, {}};
    for (std::size_t c = 0; c < chains; ++c) {
        StmConfig cfg = base;
        cfg.seed = derive_seed(base.seed, c);
        auto run = run_gibbs(in.corpus, mask, cfg);
        const auto& st = run.state;
        fs::create_directories(ctx.run_dir / "stm");
        write_chain_jsonl(st, run.samples, ctx.run_dir / "stm" / ("chain" + std::to_string(c) + ".jsonl"));
        std::string doc_acc, src_acc;
        if (!truth_by_doc.is_null()) {
            auto td = truth_vector(truth_by_doc, st, false);
            auto ts = truth_vector(truth_by_doc, st, true);
            std::vector<std::size_t> is;
            for (const auto& v : st.source_types()) is.insert(is.end(), v.begin(), v.end());
            doc_acc = num(matched_accuracy(td, st.doc_types(), cfg.n_doc_types));
            src_acc = num(matched_accuracy(ts, is, cfg.n_source_types));
        }
        summary.rows.push_back({std::to_string(c), std::to_string(cfg.seed), std::to_string(cfg.sweeps),
                                std::to_string(run.samples.size()), num(st.log_joint()), doc_acc, src_acc});
        for (std::size_t d = 0; d < st.n_docs(); ++d)
            for (std::size_t s = 0; s < st.n_sources(d); ++s)
                assign.rows.push_back({std::to_string(c), st.doc_id(d), st.source_id(d, s),
                                       std::to_string(st.doc_type(d)), std::to_string(st.source_type(d, s))});
    }
    emit(ctx, "stm/summary.csv", summary, true);
    emit(ctx, "stm/assignments.csv", assign);
}

// schema -> doc -> ppl, per split ("train", "eval"), from ppl/per_document.csv.
std::map<std::string, PerplexityTables> read_perplexities(const RunContext& ctx, const std::vector<SchemaDef>& schemata) {
    const fs::path path = require(ctx.run_dir / "ppl" / "per_document.csv", "ppl");
    Table t = read_csv(path);
    const auto cs = column(t, "schema", path), cd = column(t, "doc_id", path), csp = column(t, "split", path),
               cp = column(t, "ppl", path);
    std::set<std::string> wanted;
    for (const auto& d : schemata) wanted.insert(d.name);
    std::map<std::string, PerplexityTables> out;
    for (const auto& r : t.rows)
        if (wanted.contains(r[cs])) out[r[csp]][r[cs]][r[cd]] = parse_num(r[cp]);
    for (const auto& name : wanted)
        if (!out["eval"].contains(name)) throw DataError("no perplexities for schema '" + name + "'; rerun 'ppl'");
    return out;
}

void stage_select(const RunContext& ctx) {
    auto in = load_inputs(ctx);
    auto ppl = read_perplexities(ctx, in.schemata);
    Table sel{{"doc_id", "split", "schema"}, {}};
    Table shares{{"schema", "eval_share", "train_share"}, {}};
    std::map<std::string, SelectionTable> by_split;
    for (const auto& [split, tables] : ppl) {
        by_split[split] = select_best_schema(tables);
        for (const auto& [doc, schema] : by_split[split].per_document) sel.rows.push_back({doc, split, schema});
    }
    std::sort(sel.rows.begin(), sel.rows.end());
    for (const auto& def : in.schemata) {
        auto share = [&](const std::string& split) {
            auto it = by_split.find(split);
            return it == by_split.end() ? std::string{} : num(it->second.shares.at(def.name));
        };
        shares.rows.push_back({def.name, share("eval"), share("train")});
    }
    emit(ctx, "select/selection.csv", sel);
    emit(ctx, "select/shares.csv", shares, true);
}

void stage_affinity(const RunContext& ctx) {
    auto in = load_inputs(ctx);
    if (in.schemata.size() < 2) throw DataError("affinity needs at least two schemata");
    auto ppl = read_perplexities(ctx, in.schemata);
    PerplexityTables all;
    for (const auto& [_, tables] : ppl)
        for (const auto& [schema, docs] : tables) all[schema].insert(docs.begin(), docs.end());
    const auto a = ctx.config.get_string("affinity.schema_a", in.schemata[0].name);
    const auto b = ctx.config.get_string("affinity.schema_b", in.schemata[1].name);
    auto aff = keyword_affinity(in.corpus, all, a, b, ctx.config.get_size("affinity.top_n", 10),
                                ctx.config.get_size("affinity.min_support", 5),
                                ctx.config.get_double("affinity.min_difference", 0.0));
    Table t{{"favors", "keyword", "difference", "support"}, {}};
    for (const auto& s : aff.favor_a) t.rows.push_back({a, s.keyword, num(s.difference), std::to_string(s.support)});
    for (const auto& s : aff.favor_b) t.rows.push_back({b, s.keyword, num(s.difference), std::to_string(s.support)});
    emit(ctx, "affinity/affinity.csv", t, true);
}

void stage_cramers(const RunContext& ctx) {
    auto in = load_inputs(ctx);
    // Work on a corpus view whose labelings include aggregated sentence-level schemata.
    Corpus view = in.corpus;
    std::vector<std::string> names;
    for (const auto& def : in.schemata) {
        names.push_back(def.name);
        for (auto& [doc, lab] : labelings_of(in.corpus, def)) view.labelings[{doc, def.name}] = lab;
    }
    auto m = cramers_v_matrix(view, names);
    Table t;
    t.header.push_back("schema");
    t.header.insert(t.header.end(), names.begin(), names.end());
    for (std::size_t i = 0; i < names.size(); ++i) {
        std::vector<std::string> row{names[i]};
        for (double v : m.values[i]) row.push_back(num(v));
        t.rows.push_back(std::move(row));
    }
    emit(ctx, "cramers/matrix.csv", t, true);
    write_text(ctx.run_dir / "cramers" / "heatmap.svg",
               svg_heatmap("Cramer's V (n = " + std::to_string(m.n_sources) + " sources)", names, m.values));

    Table imb{{"schema", "n_labels", "n_sources", "entropy_nats", "majority_pct", "minority_pct"}, {}};
    for (const auto& def : in.schemata) {
        auto st = label_imbalance_stats(view, def);
        imb.rows.push_back({def.name, std::to_string(st.n_labels), std::to_string(st.n_sources), num(st.entropy_nats),
                            num(st.majority_pct), num(st.minority_pct)});
    }
    emit(ctx, "cramers/imbalance.csv", imb, true);
}

std::map<std::string, std::string> read_winners(const RunContext& ctx) {
    const fs::path path = require(ctx.run_dir / "select" / "selection.csv", "select");
    Table t = read_csv(path);
    const auto cd = column(t, "doc_id", path), cs = column(t, "schema", path);
    std::map<std::string, std::string> out;
    for (const auto& r : t.rows) out[r[cd]] = r[cs];
    return out;
}

void stage_predict(const RunContext& ctx) {
    auto in = load_inputs(ctx, false);
    auto winners = read_winners(ctx);
    const std::uint64_t seed = stage_seed(ctx.config, "predict");
    auto predictor = fit_schema_predictor(in.corpus, winners, ctx.config.get_size("predict.min_df", 1),
                                          logreg_params(ctx.config, "predict"), seed);
    fs::create_directories(ctx.run_dir / "predict");
    predictor.save(ctx.run_dir / "predict" / "predictor.json");
    Table t{{"mode", "n", "macro_auc", "micro_f1"}, {}};
    Table per_class{{"mode", "schema", "auc"}, {}};
    for (EvalMode mode : {EvalMode::balanced, EvalMode::natural}) {
        PredictorReport rep;
        try {
            rep = evaluate_schema_predictor(predictor, in.corpus, winners, mode, seed);
        } catch (const DataError& e) {
            log_warning(std::string("predict: ") + std::string(to_string(mode)) + " evaluation skipped: " + e.what());
            continue;
        }
        t.rows.push_back({std::string(to_string(mode)), std::to_string(rep.n), num(rep.macro_auc), num(rep.micro_f1)});
        for (std::size_t c = 0; c < rep.classes.size(); ++c)
            per_class.rows.push_back({std::string(to_string(mode)), rep.classes[c], num(rep.per_class_auc[c])});
    }
    emit(ctx, "predict/report.csv", t, true);
    emit(ctx, "predict/per_class.csv", per_class);
}

void stage_report(const RunContext& ctx) {
    const fs::path ppl_path = require(ctx.run_dir / "ppl" / "summary.csv", "ppl");
    Table ppl = read_csv(ppl_path);
    std::map<std::string, std::vector<std::string>> post;
    Table post_t;
    const fs::path post_path = ctx.run_dir / "posterior" / "summary.csv";
    if (fs::exists(post_path)) {
        post_t = read_csv(post_path);
        for (const auto& r : post_t.rows) post[r[column(post_t, "schema", post_path)]] = r;
    } else {
        log_warning("report: no posterior summary; F1 columns left empty");
    }
    auto opt = [](const std::string& s) -> std::optional<double> {
        if (s.empty()) return std::nullopt;
        return parse_num(s);
    };
    std::vector<SummaryRow> rows;
    for (const auto& r : ppl.rows) {
        auto get = [&](std::string_view c) { return r[column(ppl, c, ppl_path)]; };
        SummaryRow row;
        row.schema = get("schema");
        row.k = static_cast<std::size_t>(parse_num(get("k")));
        row.ppl = parse_num(get("mean_ppl"));
        row.delta_base_k = opt(get("delta_base_k"));
        row.p_base_k = opt(get("p_base_k"));
        row.delta_base_r = opt(get("delta_base_r"));
        row.p_base_r = opt(get("p_base_r"));
        if (auto it = post.find(row.schema); it != post.end()) {
            auto pget = [&](std::string_view c) { return it->second[column(post_t, c, post_path)]; };
            row.f1 = opt(pget("f1"));
            row.ratio_base_k = opt(pget("ratio_base_k"));
            row.f1_p_base_k = opt(pget("p_base_k"));
            row.ratio_base_r = opt(pget("ratio_base_r"));
            row.f1_p_base_r = opt(pget("p_base_r"));
        }
        rows.push_back(std::move(row));
    }
    emit(ctx, "report/summary.csv", summary_table(rows), true);
}

}  // namespace

RunContext make_run_context(const Config& config) {
    config.require_known(known_config_keys());
    RunContext ctx;
    ctx.config = config;
    ctx.run_dir = config.get_string("run_dir", "run");
    ctx.meta.emplace_back("config_hash", config.hash());
    ctx.meta.emplace_back("seed", std::to_string(config.get_u64("seed", 0)));
    for (const char* stage : {"synth", "negprompt", "baseline", "pp", "stm", "predict"})
        ctx.meta.emplace_back(std::string("seed.") + stage, std::to_string(stage_seed(config, stage)));
    return ctx;
}

void run_stage(std::string_view stage, const RunContext& ctx) {
    static const std::map<std::string_view, std::function<void(const RunContext&)>> stages = {
        {"synth", stage_synth},     {"train-lm", stage_train_lm}, {"baseline", stage_baseline},
        {"ppl", stage_ppl},         {"posterior", stage_posterior}, {"stm", stage_stm},
        {"select", stage_select},   {"affinity", stage_affinity}, {"cramers", stage_cramers},
        {"predict", stage_predict}, {"report", stage_report},
    };
    auto it = stages.find(stage);
    if (it == stages.end()) throw UsageError("unknown stage '" + std::string(stage) + "'");
    fs::create_directories(ctx.run_dir);
    write_text(ctx.run_dir / "config.txt", ctx.config.canonical());
    it->second(ctx);
}

void run_pipeline(const RunContext& ctx) {
    if (!ctx.config.has("corpus")) run_stage("synth", ctx);
    for (auto stage : {"train-lm", "baseline", "ppl", "posterior", "select", "affinity", "cramers", "report"})
        run_stage(stage, ctx);
    // A corpus where one schema wins every train document has nothing to
    // predict; that ends the predict stage but not the run.
    try {
        run_stage("predict", ctx);
    } catch (const DataError& e) {
        log_warning(std::string("predict stage skipped: ") + e.what());
    }
}

std::string predict_headline(const RunContext& ctx, std::string_view headline) {
    auto p = SchemaPredictor::load(require(ctx.run_dir / "predict" / "predictor.json", "predict"));
    return p.predict(headline);
}

}  // namespace srcplan
