#pragma once

// Synthetic corpora with known ground truth. planted-schema mode ties each
// source's text to its label under one schema; stm-story mode samples the
// source topic model's generative story with fixed parameters.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "srcplan/corpus.hpp"
#include "srcplan/stm.hpp"

namespace srcplan {

enum class SynthMode { planted_schema, stm_story };

std::string_view to_string(SynthMode m);
SynthMode synth_mode_from_string(std::string_view s);

// How planted-schema labels are drawn per source.
enum class LabelMode {
    independent,      // each source uniform over the label set
    document_shared,  // one uniform label per document, shared by its sources
};

struct SynthSpec {
    SynthMode mode = SynthMode::planted_schema;
    std::size_t n_docs = 200;
    std::size_t sources_per_doc = 4;
    std::size_t tokens_per_source = 30;
    std::size_t background_tokens = 0;
    std::size_t sentence_len = 10;
    std::vector<SchemaDef> schemata;  // empty: two 4-label schemata, "Planted" and "Decoy"
    std::string planted_schema = "Planted";
    double separation = 0.8;  // share of a label's emissions on its private block
    // Each document plants one schema drawn uniformly from `schemata`; its
    // headline carries a cue token and a keyword naming that schema.
    bool keyword_link = false;
    LabelMode label_mode = LabelMode::independent;
    // Put a cue token naming the document's planted label into the headline
    // (only meaningful with LabelMode::document_shared).
    bool label_cue = false;
    std::size_t private_block_size = 10;
    std::size_t shared_block_size = 40;
    std::size_t headline_noise_tokens = 5;
    std::size_t eval_every = 5;  // document i is eval when i % eval_every == eval_every - 1

    // stm-story parameters; counts come from `stm`.
    StmConfig stm;
    double type_concentration = 0.85;  // mass on each type's home component
    std::uint64_t seed = 0;

    // Throws UsageError on an invalid spec.
    void validate() const;
    std::vector<SchemaDef> effective_schemata() const;
};

struct SynthResult {
    Corpus corpus;
    SchemaRegistry registry;
    nlohmann::json ground_truth;
};

SynthResult generate_corpus(const SynthSpec& spec);

// Document id -> planted schema, read back from a ground-truth record.
std::map<std::string, std::string> planted_schema_by_doc(const nlohmann::json& ground_truth);

void save_ground_truth(const nlohmann::json& truth, const std::filesystem::path& path);

}  // namespace srcplan
