#pragma once

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "umpc/geometry.hpp"

namespace umpc::cli::svg {

struct Bounds {
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = std::numeric_limits<double>::infinity();
  double max_x = -std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();

  void include(const Vec2& p, double margin) {
    min_x = std::min(min_x, p.x() - margin);
    min_y = std::min(min_y, p.y() - margin);
    max_x = std::max(max_x, p.x() + margin);
    max_y = std::max(max_y, p.y() + margin);
  }
  Bounds padded(double pad) const {
    Bounds b = *this;
    if (!(b.max_x >= b.min_x)) b = {-1.0, -1.0, 1.0, 1.0};
    b.min_x -= pad;
    b.min_y -= pad;
    b.max_x += pad;
    b.max_y += pad;
    return b;
  }
};

/// World-to-pixel canvas with y pointing up and equal axis scales.
class Canvas {
 public:
  Canvas(const Bounds& world, double width_px) : world_(world) {
    const double w = world.max_x - world.min_x;
    const double h = world.max_y - world.min_y;
    scale_ = width_px / w;
    width_ = width_px;
    height_ = h * scale_;
    body_ += fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
        "viewBox=\"0 0 {:.0f} {:.0f}\">\n",
        width_, height_, width_, height_);
    body_ += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }

  double scale() const { return scale_; }

  void polyline(const std::vector<Vec2>& pts, const std::string& color, double width,
                const std::string& dash = {}) {
    if (pts.size() < 2) return;
    body_ += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" +
             fmt::format("{:.2f}", width) + "\"";
    if (!dash.empty()) body_ += " stroke-dasharray=\"" + dash + "\"";
    body_ += " points=\"" + points(pts) + "\"/>\n";
  }

  void polygon(const std::vector<Vec2>& pts, const std::string& color, double opacity) {
    body_ += fmt::format("<polygon fill=\"{}\" fill-opacity=\"{:.2f}\" stroke=\"{}\" "
                         "stroke-width=\"0.5\" points=\"{}\"/>\n",
                         color, opacity, color, points(pts));
  }

  void dot(const Vec2& p, double radius_px, const std::string& color) {
    const Vec2 q = px(p);
    body_ += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"{:.2f}\" fill=\"{}\"/>\n",
                         q.x(), q.y(), radius_px, color);
  }

  void circle(const Vec2& p, double radius_m, const std::string& color) {
    const Vec2 q = px(p);
    body_ += fmt::format(
        "<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"{:.2f}\" fill=\"none\" stroke=\"{}\"/>\n",
        q.x(), q.y(), radius_m * scale_, color);
  }

  void line(const Vec2& a, const Vec2& b, const std::string& color, double width) {
    const Vec2 p = px(a);
    const Vec2 q = px(b);
    body_ += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" "
                         "stroke=\"{}\" stroke-width=\"{:.2f}\"/>\n",
                         p.x(), p.y(), q.x(), q.y(), color, width);
  }

  /// Text at pixel coordinates.
  void text(const Vec2& at_px, const std::string& content, double size_px) {
    body_ += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" "
                         "font-size=\"{:.0f}\">{}</text>\n",
                         at_px.x(), at_px.y(), size_px, escape(content));
  }

  std::string str() const { return body_ + "</svg>\n"; }

 private:
  Vec2 px(const Vec2& p) const {
    return {(p.x() - world_.min_x) * scale_, (world_.max_y - p.y()) * scale_};
  }

  std::string points(const std::vector<Vec2>& pts) const {
    std::string out;
    for (const Vec2& p : pts) {
      const Vec2 q = px(p);
      if (!out.empty()) out += ' ';
      out += fmt::format("{:.2f},{:.2f}", q.x(), q.y());
    }
    return out;
  }

  static std::string escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
      switch (ch) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        default: out += ch;
      }
    }
    return out;
  }

  Bounds world_;
  double scale_ = 1.0;
  double width_ = 0.0;
  double height_ = 0.0;
  std::string body_;
};

}  // namespace umpc::cli::svg
