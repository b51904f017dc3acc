#include "hvaudit/audit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

#include "hvaudit/error.hpp"
#include "hvaudit/io.hpp"

namespace hvaudit {

using nlohmann::json;

ClassifiedCorpus classify_corpus(const LinearSoftmaxModel& model, const Corpus& c, const Taxonomy& taxonomy,
                                 const std::map<std::string, FeatureVector>* embeddings) {
  if (model.taxonomy_fingerprint != taxonomy.fingerprint() || model.num_classes() != taxonomy.size())
    throw Error(ErrorCode::kFingerprintMismatch,
                fmt::format("model taxonomy {} does not match active taxonomy {}",
                            io::hex64(model.taxonomy_fingerprint), io::hex64(taxonomy.fingerprint())));
  ClassifiedCorpus cc;
  cc.taxonomy_fingerprint = taxonomy.fingerprint();
  const auto preds = predict_batch(model, c, embeddings);
  cc.records.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i)
    cc.records.push_back({c.items[i].pref_id, c.items[i].source, c.items[i].role, preds[i].label,
                          preds[i].probability});
  return cc;
}

void write_classified(const std::filesystem::path& path, const ClassifiedCorpus& cc) {
  std::string buf = json{{"format", "hvaudit.classified"},
                         {"version", 1},
                         {"taxonomy_fingerprint", io::hex64(cc.taxonomy_fingerprint)}}
                        .dump();
  buf += '\n';
  for (const auto& r : cc.records) {
    buf += json{{"pref_id", r.pref_id},
                {"source", to_string(r.source)},
                {"role", to_string(r.role)},
                {"label", r.label},
                {"prob", r.probability}}
               .dump();
    buf += '\n';
  }
  io::write_file(path, buf);
}

ClassifiedCorpus read_classified(const std::filesystem::path& path) {
  ClassifiedCorpus cc;
  bool header = true;
  io::for_each_line(path, [&](std::size_t line_no, std::string_view line) {
    try {
      const auto j = json::parse(line);
      if (header) {
        header = false;
        if (j.value("format", std::string{}) != "hvaudit.classified")
          throw Error(ErrorCode::kMalformedRecord, path.string() + ": missing classified-corpus header");
        cc.taxonomy_fingerprint = std::stoull(j.at("taxonomy_fingerprint").get<std::string>(), nullptr, 16);
        return;
      }
      cc.records.push_back({j.at("pref_id").get<std::string>(), source_from_string(j.at("source").get<std::string>()),
                            role_from_string(j.at("role").get<std::string>()), j.at("label").get<LabelId>(),
                            j.at("prob").get<double>()});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedRecord, fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  });
  if (header) throw Error(ErrorCode::kMalformedRecord, path.string() + ": empty classified-corpus file");
  return cc;
}

DistributionReport distribution(const ClassifiedCorpus& cc, const Taxonomy& taxonomy, std::string dataset_id,
                                const RecordFilter& filter) {
  if (cc.taxonomy_fingerprint != taxonomy.fingerprint())
    throw Error(ErrorCode::kFingerprintMismatch, "classified corpus was produced under a different taxonomy");
  DistributionReport r;
  r.dataset_id = std::move(dataset_id);
  r.taxonomy_fingerprint = taxonomy.fingerprint();
  for (const auto& l : taxonomy.labels()) r.label_names.push_back(l.name);
  r.counts.assign(taxonomy.size(), 0);
  for (const auto& rec : cc.records) {
    if (!filter.matches(rec)) continue;
    if (!taxonomy.contains(rec.label))
      throw Error(ErrorCode::kUnknownLabel, fmt::format("record '{}' has label {}", rec.pref_id, rec.label));
    ++r.counts[static_cast<std::size_t>(rec.label)];
    ++r.total;
  }
  if (r.total == 0) throw Error(ErrorCode::kEmptyAfterFilter, "no records left after filtering for " + r.dataset_id);
  for (auto count : r.counts) r.percentages.push_back(100.0 * static_cast<double>(count) / static_cast<double>(r.total));
  return r;
}

ComparisonMatrix compare(std::span<const DistributionReport> reports) {
  if (reports.size() < 2) throw Error(ErrorCode::kEmptyInput, "comparison needs at least two reports");
  ComparisonMatrix m;
  m.label_names = reports.front().label_names;
  for (const auto& r : reports) {
    if (r.taxonomy_fingerprint != reports.front().taxonomy_fingerprint || r.label_names != m.label_names)
      throw Error(ErrorCode::kTaxonomyMismatch, "report '" + r.dataset_id + "' uses a different taxonomy");
    double sum = 0.0;
    for (double p : r.percentages) sum += p;
    if (std::abs(sum - 100.0) > 1e-6)
      throw Error(ErrorCode::kMalformedRecord, fmt::format("report '{}' sums to {}%", r.dataset_id, sum));
    m.datasets.push_back(r.dataset_id);
    m.cells.push_back(r.percentages);
  }
  return m;
}

void write_distribution(const std::filesystem::path& path, const DistributionReport& r) {
  std::string buf = fmt::format("# dataset: {}\n# taxonomy: {}\n# total: {}\nlabel_id\tlabel\tcount\tpercent\n",
                                r.dataset_id, io::hex64(r.taxonomy_fingerprint), r.total);
  for (std::size_t j = 0; j < r.counts.size(); ++j)
    buf += fmt::format("{}\t{}\t{}\t{}\n", j, r.label_names[j], r.counts[j], r.percentages[j]);
  io::write_file(path, buf);
}

DistributionReport read_distribution(const std::filesystem::path& path) {
  DistributionReport r;
  bool saw_header = false;
  io::for_each_line(path, [&](std::size_t line_no, std::string_view line) {
    const auto bad = [&](std::string_view why) {
      throw Error(ErrorCode::kMalformedRecord, fmt::format("{}:{}: {}", path.string(), line_no, why));
    };
    if (line.starts_with("# dataset: ")) {
      r.dataset_id = std::string(line.substr(11));
    } else if (line.starts_with("# taxonomy: ")) {
      r.taxonomy_fingerprint = std::stoull(std::string(line.substr(12)), nullptr, 16);
    } else if (line.starts_with("# total: ")) {
      r.total = std::stoll(std::string(line.substr(9)));
    } else if (line.starts_with("#")) {
      return;
    } else if (!saw_header) {
      if (line != "label_id\tlabel\tcount\tpercent") bad("unexpected table header");
      saw_header = true;
    } else {
      std::vector<std::string> f;
      std::size_t start = 0;
      for (std::size_t tab; (tab = line.find('\t', start)) != std::string_view::npos; start = tab + 1)
        f.emplace_back(line.substr(start, tab - start));
      f.emplace_back(line.substr(start));
      if (f.size() != 4) bad("expected 4 columns");
      if (std::stoul(f[0]) != r.counts.size()) bad("label ids must be contiguous");
      r.label_names.push_back(f[1]);
      r.counts.push_back(std::stoll(f[2]));
      r.percentages.push_back(std::strtod(f[3].c_str(), nullptr));
    }
  });
  std::int64_t sum = 0;
  for (auto c : r.counts) sum += c;
  if (!saw_header || sum != r.total)
    throw Error(ErrorCode::kMalformedRecord, path.string() + ": counts do not add up to the stated total");
  return r;
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string file_stem_for(std::string_view id) {
  std::string out;
  for (char c : id)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '_') ? c : '_';
  return out.empty() ? "dataset" : out;
}

// Linear blend from near-white to dark blue; t in [0, 1].
std::string cell_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const auto mix = [t](int lo, int hi) { return static_cast<int>(std::lround(lo + (hi - lo) * t)); };
  return fmt::format("#{:02x}{:02x}{:02x}", mix(0xf7, 0x08), mix(0xfb, 0x30), mix(0xff, 0x6b));
}

}  // namespace

std::string render_comparison_tsv(const ComparisonMatrix& m) {
  std::string buf = "dataset";
  for (const auto& name : m.label_names) buf += "\t" + name;
  buf += '\n';
  for (std::size_t r = 0; r < m.datasets.size(); ++r) {
    buf += m.datasets[r];
    for (double p : m.cells[r]) buf += fmt::format("\t{}", p);
    buf += '\n';
  }
  return buf;
}

std::string render_heatmap_svg(const ComparisonMatrix& m) {
  constexpr int kCellW = 110, kCellH = 44, kLeft = 230, kTop = 170, kPad = 20;
  const int cols = static_cast<int>(m.label_names.size());
  const int rows = static_cast<int>(m.datasets.size());
  const int width = kLeft + cols * kCellW + kPad;
  const int height = kTop + rows * kCellH + kPad;
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"Helvetica, Arial, sans-serif\" font-size=\"13\">\n"
      "<rect width=\"{0}\" height=\"{1}\" fill=\"#ffffff\"/>\n",
      width, height);
  for (int c = 0; c < cols; ++c) {
    const int x = kLeft + c * kCellW + kCellW / 2;
    svg += fmt::format("<text x=\"{0}\" y=\"{1}\" transform=\"rotate(-35 {0} {1})\" text-anchor=\"start\">{2}</text>\n",
                       x, kTop - 10, xml_escape(m.label_names[static_cast<std::size_t>(c)]));
  }
  for (int r = 0; r < rows; ++r) {
    const int y = kTop + r * kCellH;
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\" dominant-baseline=\"middle\">{}</text>\n",
                       kLeft - 10, y + kCellH / 2, xml_escape(m.datasets[static_cast<std::size_t>(r)]));
    for (int c = 0; c < cols; ++c) {
      const double pct = m.cells[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      const int x = kLeft + c * kCellW;
      svg += fmt::format(
          "<g class=\"cell\"><rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"#ffffff\"/>"
          "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" dominant-baseline=\"middle\" fill=\"{}\">{:.2f}%</text></g>\n",
          x, y, kCellW, kCellH, cell_color(pct / 100.0), x + kCellW / 2, y + kCellH / 2,
          pct > 50.0 ? "#ffffff" : "#000000", pct);
    }
  }
  svg += "</svg>\n";
  return svg;
}

std::string render_summary(const ComparisonMatrix& m, std::span<const DistributionReport> reports) {
  std::string buf = "Human value distribution summary\n\n";
  for (std::size_t r = 0; r < m.datasets.size(); ++r) {
    const auto& row = m.cells[r];
    const auto most = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    const auto least = static_cast<std::size_t>(std::min_element(row.begin(), row.end()) - row.begin());
    std::int64_t total = 0;
    for (const auto& rep : reports)
      if (rep.dataset_id == m.datasets[r]) total = rep.total;
    buf += fmt::format("{} ({} preferences)\n  most represented:  {} ({:.2f}%)\n  least represented: {} ({:.2f}%)\n",
                       m.datasets[r], total, m.label_names[most], row[most], m.label_names[least], row[least]);
    for (std::size_t j = 0; j < row.size(); ++j) buf += fmt::format("    {:<32} {:6.2f}%\n", m.label_names[j], row[j]);
    buf += '\n';
  }
  return buf;
}

std::vector<std::filesystem::path> emit_report(const ComparisonMatrix& m,
                                               std::span<const DistributionReport> reports,
                                               const std::filesystem::path& out_dir) {
  std::vector<std::filesystem::path> written;
  const auto put = [&](const std::filesystem::path& p, const std::string& contents) {
    io::write_file(p, contents);
    written.push_back(p);
  };
  put(out_dir / "comparison.tsv", render_comparison_tsv(m));
  for (const auto& r : reports) {
    const auto p = out_dir / "distributions" / (file_stem_for(r.dataset_id) + ".tsv");
    write_distribution(p, r);
    written.push_back(p);
  }
  put(out_dir / "heatmap.svg", render_heatmap_svg(m));
  put(out_dir / "summary.txt", render_summary(m, reports));
  return written;
}

}  // namespace hvaudit
