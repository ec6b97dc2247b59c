#include "multilc/svg.hpp"

#include <cstddef>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "multilc/types.hpp"

namespace multilc {
namespace {

using nlohmann::json;

// Qualitative palette (colorblind-safe), cycled over classes.
constexpr const char* kPalette[] = {"#E69F00", "#56B4E9", "#009E73", "#F0E442",
                                    "#0072B2", "#D55E00", "#CC79A7", "#999999"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string xml_escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (const char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string coord(double v) { return fmt::format("{:.2f}", v); }

}  // namespace

std::string render_svg(const std::string& fit_json, bool horizontal_labels,
                       const std::vector<std::string>& class_labels) {
  json doc;
  try {
    doc = json::parse(fit_json);
  } catch (const json::exception& e) {
    throw InputError(std::string("invalid fit JSON: ") + e.what());
  }
  if (doc.value("schema_version", 0) != 1 || doc.value("kind", std::string()) != "fit") {
    throw InputError("invalid fit JSON: expected a schema_version 1 fit document");
  }
  const json& spec = doc.at("spec");
  const json& items = spec.at("items");
  const json& phi = doc.at("params").at("phi");
  const int t_count = spec.at("t").get<int>();
  const std::size_t h_count = items.size();

  std::vector<std::string> legend;
  if (class_labels.empty()) {
    for (int t = 0; t < t_count; ++t) legend.push_back(fmt::format("C{}", t + 1));
  } else if (static_cast<int>(class_labels.size()) == t_count) {
    legend = class_labels;
  } else {
    throw InputError(fmt::format("expected {} class labels, got {}", t_count,
                                 class_labels.size()));
  }

  // Bar values: per item and class, the probability mass off the first
  // category (equals phi of the second category for binary items).
  std::vector<std::vector<double>> values(h_count, std::vector<double>(t_count, 0.0));
  std::vector<std::string> names(h_count);
  for (std::size_t h = 0; h < h_count; ++h) {
    names[h] = items[h].value("name", std::string());
    const json& m = phi[h];
    const Index cols = m.at("cols").get<Index>();
    const json& data = m.at("data");
    for (int t = 0; t < t_count; ++t) {
      values[h][static_cast<std::size_t>(t)] =
          1.0 - data[static_cast<std::size_t>(t * cols)].get<double>();
    }
  }

  const double width = 960.0, height = 640.0;
  const double left = 70.0, right = 20.0, top = 50.0;
  const double bottom = horizontal_labels ? 70.0 : 130.0;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  const double base_y = top + plot_h;

  std::string svg = fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\">\n",
      static_cast<int>(width), static_cast<int>(height));
  svg += "<rect width=\"960\" height=\"640\" fill=\"#ffffff\"/>\n";
  svg += fmt::format(
      "<text x=\"{}\" y=\"28\" font-family=\"sans-serif\" font-size=\"18\" "
      "text-anchor=\"middle\">Response profiles</text>\n",
      coord(left + plot_w / 2.0));

  // Horizontal gridlines and y-axis tick labels.
  for (int tick = 0; tick <= 5; ++tick) {
    const double v = tick / 5.0;
    const double y = base_y - v * plot_h;
    svg += fmt::format(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
        coord(left), coord(y), coord(left + plot_w), coord(y));
    svg += fmt::format(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" "
        "text-anchor=\"end\">{:.1f}</text>\n",
        coord(left - 8.0), coord(y + 4.0), v);
  }

  // Bars: one slot per item, T bars per slot.
  const double slot = plot_w / static_cast<double>(h_count);
  const double group_w = 0.8 * slot;
  const double bar_w = group_w / static_cast<double>(t_count);
  for (std::size_t h = 0; h < h_count; ++h) {
    const double x0 = left + static_cast<double>(h) * slot + 0.1 * slot;
    for (int t = 0; t < t_count; ++t) {
      const double v = values[h][static_cast<std::size_t>(t)];
      const double bh = v * plot_h;
      svg += fmt::format(
          "<rect class=\"bar\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
          coord(x0 + t * bar_w), coord(base_y - bh), coord(bar_w), coord(bh),
          kPalette[static_cast<std::size_t>(t) % kPaletteSize]);
    }
    const double cx = x0 + group_w / 2.0;
    if (horizontal_labels) {
      svg += fmt::format(
          "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" "
          "text-anchor=\"middle\">{}</text>\n",
          coord(cx), coord(base_y + 18.0), xml_escape(names[h]));
    } else {
      svg += fmt::format(
          "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" "
          "text-anchor=\"end\" transform=\"rotate(-90 {} {})\">{}</text>\n",
          coord(cx), coord(base_y + 14.0), coord(cx), coord(base_y + 14.0),
          xml_escape(names[h]));
    }
  }

  // Axes.
  svg += fmt::format(
      "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#000000\" "
      "stroke-width=\"1\"/>\n",
      coord(left), coord(top), coord(base_y));
  svg += fmt::format(
      "<line x1=\"{0}\" y1=\"{2}\" x2=\"{1}\" y2=\"{2}\" stroke=\"#000000\" "
      "stroke-width=\"1\"/>\n",
      coord(left), coord(left + plot_w), coord(base_y));
  svg += fmt::format(
      "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" "
      "text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">response probability</text>\n",
      coord(top + plot_h / 2.0), coord(top + plot_h / 2.0));

  // Legend, top-right corner.
  for (int t = 0; t < t_count; ++t) {
    const double y = top + 6.0 + 18.0 * static_cast<double>(t);
    svg += fmt::format(
        "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n",
        coord(width - right - 150.0), coord(y),
        kPalette[static_cast<std::size_t>(t) % kPaletteSize]);
    svg += fmt::format(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
        coord(width - right - 132.0), coord(y + 10.0),
        xml_escape(legend[static_cast<std::size_t>(t)]));
  }

  svg += "</svg>\n";
  return svg;
}

}  // namespace multilc
