#include "srcplan/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "srcplan/error.hpp"
#include "srcplan/log.hpp"

namespace srcplan {

SelectionTable select_best_schema(const PerplexityTables& ppl) {
    if (ppl.empty()) throw DataError("select_best_schema: no schemata");
    const auto& reference = ppl.begin()->second;
    for (const auto& [schema, table] : ppl) {
        if (table.size() != reference.size())
            throw DataError("schema '" + schema + "' covers a different document set");
        for (const auto& [doc, _] : reference)
            if (!table.contains(doc)) throw DataError("schema '" + schema + "' is missing document '" + doc + "'");
    }
    SelectionTable sel;
    for (const auto& [schema, _] : ppl) sel.shares[schema] = 0.0;
    for (const auto& [doc, _] : reference) {
        // std::map iterates names in lexicographic order, so strict < keeps
        // the smaller name on ties.
        const std::string* best = nullptr;
        double best_v = 0.0;
        for (const auto& [schema, table] : ppl) {
            const double v = table.at(doc);
            if (!best || v < best_v) {
                best = &schema;
                best_v = v;
            }
        }
        sel.per_document[doc] = *best;
        sel.shares[*best] += 1.0;
    }
    if (!reference.empty())
        for (auto& [_, s] : sel.shares) s /= static_cast<double>(reference.size());
    return sel;
}

KeywordAffinity keyword_affinity(const Corpus& corpus, const PerplexityTables& ppl, const std::string& schema_a,
                                 const std::string& schema_b, std::size_t top_n, std::size_t min_support,
                                 double min_abs_difference) {
    auto ia = ppl.find(schema_a);
    auto ib = ppl.find(schema_b);
    if (ia == ppl.end() || ib == ppl.end()) throw DataError("keyword_affinity: schema missing from perplexity tables");
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const auto& doc : corpus.documents) {
        auto a = ia->second.find(doc.id);
        auto b = ib->second.find(doc.id);
        if (a == ia->second.end() || b == ib->second.end()) continue;
        std::set<std::string> kws(doc.keywords.begin(), doc.keywords.end());
        for (const auto& kw : kws) {
            auto& [sum, n] = acc[kw];
            sum += a->second - b->second;
            ++n;
        }
    }
    KeywordAffinity out;
    std::size_t dropped = 0;
    for (const auto& [kw, v] : acc) {
        if (v.second < min_support) {
            ++dropped;
            continue;
        }
        out.all.push_back({kw, v.first / static_cast<double>(v.second), v.second});
    }
    if (dropped > 0)
        log_info("keyword_affinity: dropped " + std::to_string(dropped) + " keywords below support " +
                 std::to_string(min_support));
    for (const auto& s : out.all) {
        if (s.difference < -min_abs_difference) out.favor_a.push_back(s);
        if (s.difference > min_abs_difference) out.favor_b.push_back(s);
    }
    auto by_value = [](bool ascending) {
        return [ascending](const KeywordScore& x, const KeywordScore& y) {
            if (x.difference != y.difference) return ascending ? x.difference < y.difference : x.difference > y.difference;
            return x.keyword < y.keyword;
        };
    };
    std::sort(out.favor_a.begin(), out.favor_a.end(), by_value(true));
    std::sort(out.favor_b.begin(), out.favor_b.end(), by_value(false));
    if (out.favor_a.size() > top_n) out.favor_a.resize(top_n);
    if (out.favor_b.size() > top_n) out.favor_b.resize(top_n);
    return out;
}

double cramers_v_table(const std::vector<std::vector<double>>& table) {
    if (table.empty()) throw std::invalid_argument("cramers_v: empty table");
    const std::size_t r0 = table.size(), c0 = table.front().size();
    std::vector<double> row(r0, 0.0), col(c0, 0.0);
    double n = 0.0;
    for (std::size_t i = 0; i < r0; ++i) {
        if (table[i].size() != c0) throw std::invalid_argument("cramers_v: ragged table");
        for (std::size_t j = 0; j < c0; ++j) {
            row[i] += table[i][j];
            col[j] += table[i][j];
            n += table[i][j];
        }
    }
    if (n <= 0.0) throw std::invalid_argument("cramers_v: empty table");
    const auto r = static_cast<std::size_t>(std::count_if(row.begin(), row.end(), [](double x) { return x > 0; }));
    const auto c = static_cast<std::size_t>(std::count_if(col.begin(), col.end(), [](double x) { return x > 0; }));
    if (std::min(r, c) <= 1) {
        log_warning("cramers_v: a variable has a single category; returning 0");
        return 0.0;
    }
    double chi2 = 0.0;
    for (std::size_t i = 0; i < r0; ++i) {
        if (row[i] == 0.0) continue;
        for (std::size_t j = 0; j < c0; ++j) {
            if (col[j] == 0.0) continue;
            const double e = row[i] * col[j] / n;
            const double d = table[i][j] - e;
            chi2 += d * d / e;
        }
    }
    const double v = std::sqrt(chi2 / (n * static_cast<double>(std::min(r, c) - 1)));
    return std::min(1.0, v);
}

double cramers_v(std::span<const std::string> labels_a, std::span<const std::string> labels_b) {
    if (labels_a.size() != labels_b.size()) throw std::invalid_argument("cramers_v: length mismatch");
    if (labels_a.empty()) throw std::invalid_argument("cramers_v: no observations");
    std::map<std::string, std::size_t> ra, cb;
    for (const auto& a : labels_a) ra.emplace(a, 0);
    for (const auto& b : labels_b) cb.emplace(b, 0);
    std::size_t i = 0;
    for (auto& [_, idx] : ra) idx = i++;
    i = 0;
    for (auto& [_, idx] : cb) idx = i++;
    std::vector<std::vector<double>> table(ra.size(), std::vector<double>(cb.size(), 0.0));
    for (std::size_t k = 0; k < labels_a.size(); ++k) table[ra[labels_a[k]]][cb[labels_b[k]]] += 1.0;
    return cramers_v_table(table);
}

CramersMatrix cramers_v_matrix(const Corpus& corpus, const std::vector<std::string>& schemata) {
    CramersMatrix m;
    m.schemata = schemata;
    std::vector<std::vector<std::string>> columns(schemata.size());
    std::size_t skipped = 0;
    for (const auto& doc : corpus.documents) {
        std::vector<const Labeling*> labs;
        for (const auto& s : schemata) labs.push_back(corpus.labeling(doc.id, s));
        for (const auto& src : doc.sources) {
            std::vector<const std::string*> row;
            for (const Labeling* lab : labs) {
                if (!lab) break;
                auto it = lab->assignments.find(src.source_id);
                if (it == lab->assignments.end()) break;
                row.push_back(&it->second);
            }
            if (row.size() != schemata.size()) {
                ++skipped;
                continue;
            }
            for (std::size_t i = 0; i < row.size(); ++i) columns[i].push_back(*row[i]);
        }
    }
    if (skipped > 0) log_warning("cramers_v_matrix: skipped " + std::to_string(skipped) + " partially labeled sources");
    m.n_sources = columns.empty() ? 0 : columns.front().size();
    if (m.n_sources == 0) throw DataError("cramers_v_matrix: no source is labeled under every schema");
    m.values.assign(schemata.size(), std::vector<double>(schemata.size(), 1.0));
    for (std::size_t i = 0; i < schemata.size(); ++i)
        for (std::size_t j = i + 1; j < schemata.size(); ++j)
            m.values[i][j] = m.values[j][i] = cramers_v(columns[i], columns[j]);
    return m;
}

ImbalanceStats imbalance_from_labels(std::span<const std::string> labels, const SchemaDef& schema) {
    if (labels.empty()) throw DataError("imbalance: no labeled sources for '" + schema.name + "'");
    std::map<std::string, std::size_t> counts;
    for (const auto& l : schema.labels) counts[l] = 0;
    for (const auto& l : labels) {
        if (!schema.contains(l)) throw DataError("label '" + l + "' not in schema '" + schema.name + "'");
        ++counts[l];
    }
    ImbalanceStats st;
    st.n_labels = schema.size();
    st.n_sources = labels.size();
    const double n = static_cast<double>(labels.size());
    std::size_t mx = 0, mn = labels.size();
    for (const auto& [_, c] : counts) {
        mx = std::max(mx, c);
        mn = std::min(mn, c);
        if (c > 0) {
            const double p = static_cast<double>(c) / n;
            st.entropy_nats -= p * std::log(p);
        }
    }
    st.majority_pct = 100.0 * static_cast<double>(mx) / n;
    st.minority_pct = 100.0 * static_cast<double>(mn) / n;
    return st;
}

ImbalanceStats label_imbalance_stats(const Corpus& corpus, const SchemaDef& schema) {
    std::vector<std::string> labels;
    for (const auto& [key, lab] : corpus.labelings) {
        if (key.second != schema.name) continue;
        for (const auto& [_, l] : lab.assignments) labels.push_back(l);
    }
    return imbalance_from_labels(labels, schema);
}

std::string aggregate_source_label(std::span<const std::string> sentence_labels,
                                   const std::map<std::string, double>& prior) {
    if (sentence_labels.empty()) throw std::invalid_argument("aggregate_source_label: no sentence labels");
    std::map<std::string, std::size_t> counts;
    for (const auto& l : sentence_labels) ++counts[l];
    const double n = static_cast<double>(sentence_labels.size());
    std::string best;
    double best_lift = -1.0, best_share = -1.0;
    for (const auto& [label, c] : counts) {
        auto it = prior.find(label);
        if (it == prior.end()) throw DataError("label '" + label + "' missing from prior");
        if (!(it->second > 0.0)) throw DataError("prior of label '" + label + "' is not positive");
        const double share = static_cast<double>(c) / n;
        const double lift = share / it->second;
        if (lift > best_lift || (lift == best_lift && share > best_share)) {
            best = label;
            best_lift = lift;
            best_share = share;
        }
    }
    return best;
}

std::map<std::string, double> sentence_label_prior(const Corpus& corpus, const std::string& schema) {
    std::map<std::string, double> counts;
    double n = 0.0;
    for (const auto& doc : corpus.documents)
        for (const auto& src : doc.sources) {
            auto it = src.sentence_labels.find(schema);
            if (it == src.sentence_labels.end()) continue;
            for (const auto& l : it->second) {
                counts[l] += 1.0;
                n += 1.0;
            }
        }
    for (auto& [_, c] : counts) c /= n;
    return counts;
}

LabelingSet aggregate_sentence_labels(const Corpus& corpus, const std::string& schema,
                                      const std::map<std::string, double>& prior) {
    LabelingSet out;
    for (const auto& doc : corpus.documents) {
        Labeling lab;
        lab.schema = schema;
        for (const auto& src : doc.sources) {
            auto it = src.sentence_labels.find(schema);
            if (it == src.sentence_labels.end()) continue;
            lab.assignments[src.source_id] = aggregate_source_label(it->second, prior);
        }
        if (!lab.assignments.empty()) out.emplace(doc.id, std::move(lab));
    }
    return out;
}

}  // namespace srcplan
