#pragma once

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "srcplan/corpus.hpp"

namespace fixture {

using srcplan::Corpus;
using srcplan::Document;
using srcplan::Labeling;
using srcplan::Split;

// owners[i] lists the sentence indices of source "s{i}".
inline Document make_doc(std::string id, std::vector<std::string> sentences,
                         std::vector<std::vector<std::size_t>> owners, std::string headline = {}) {
    Document d;
    d.id = std::move(id);
    d.headline = std::move(headline);
    d.sentences = std::move(sentences);
    for (std::size_t i = 0; i < owners.size(); ++i) {
        srcplan::SourceRecord s;
        s.source_id = "s" + std::to_string(i);
        s.name = "Source " + std::to_string(i);
        s.sentence_indices = owners[i];
        d.sources.push_back(std::move(s));
    }
    return d;
}

inline Labeling make_labeling(std::string schema, std::vector<std::string> labels) {
    Labeling l;
    l.schema = std::move(schema);
    for (std::size_t i = 0; i < labels.size(); ++i) l.assignments["s" + std::to_string(i)] = labels[i];
    return l;
}

// Adds a document whose sources each own one sentence, labeled under `schema`.
inline void add_doc(Corpus& c, const std::string& id, const std::vector<std::string>& source_texts,
                    const std::vector<std::string>& labels, Split split, const std::string& schema = "Toy",
                    const std::string& headline = {}) {
    std::vector<std::vector<std::size_t>> owners;
    for (std::size_t i = 0; i < source_texts.size(); ++i) owners.push_back({i});
    c.documents.push_back(make_doc(id, source_texts, owners, headline));
    c.split[id] = split;
    if (!labels.empty()) c.labelings[{id, schema}] = make_labeling(schema, labels);
}

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("srcplan_test_" + tag + "_" + std::to_string(std::random_device{}()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

}  // namespace fixture
