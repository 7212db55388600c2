#pragma once

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "relopt/collision.hpp"
#include "relopt/relations.hpp"
#include "relopt/scene.hpp"

namespace relopt {

struct TopDownStyle {
  double pixels_per_meter = 80.0;
  double margin = 20.0;
  double contact_tolerance = 0.1;
};

namespace render_detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace render_detail

/// Bird's-eye SVG: floor polygon, object footprints (red when colliding with
/// another object), camera at the origin, and a dashed link between objects in
/// contact. The x axis points right and +z points up the page.
inline std::string topdown_svg(const Scene& scene, const TopDownStyle& style = {}) {
  using render_detail::fmt;
  const auto& poly = scene.layout().floor_polygon;
  double x0 = 0, x1 = 0, z0 = 0, z1 = 0;
  for (const auto& p : poly) {
    x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
    z0 = std::min(z0, p.z), z1 = std::max(z1, p.z);
  }
  const double k = style.pixels_per_meter, m = style.margin;
  auto px = [&](double x) { return fmt(m + (x - x0) * k); };
  auto py = [&](double z) { return fmt(m + (z1 - z) * k); };
  const double w = (x1 - x0) * k + 2 * m, h = (z1 - z0) * k + 2 * m;

  const auto boxes = scene.object_boxes();
  std::vector<bool> colliding(boxes.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> contacts;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      if (boxes_collide(boxes[i], boxes[j])) colliding[i] = colliding[j] = true;
      else if (contact_test(boxes[i], boxes[j], style.contact_tolerance)) contacts.emplace_back(i, j);
    }
  }

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(w) << "\" height=\"" << fmt(h)
    << "\" viewBox=\"0 0 " << fmt(w) << ' ' << fmt(h) << "\">\n";
  s << "<polygon fill=\"#f4f1ea\" stroke=\"#333\" stroke-width=\"3\" points=\"";
  for (const auto& p : poly) s << px(p.x) << ',' << py(p.z) << ' ';
  s << "\"/>\n";
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto c = box_corners(boxes[i]);
    s << "<polygon fill=\"" << (colliding[i] ? "#e06666" : "#9fc5e8")
      << "\" fill-opacity=\"0.7\" stroke=\"#222\" stroke-width=\"1\" data-id=\""
      << scene.objects()[i].id << "\" points=\"";
    for (int q = 0; q < 4; ++q) s << px(c[q].x) << ',' << py(c[q].z) << ' ';
    s << "\"/>\n";
    // front edge marker
    s << "<line stroke=\"#222\" stroke-width=\"2\" x1=\"" << px(c[2].x) << "\" y1=\"" << py(c[2].z)
      << "\" x2=\"" << px(c[3].x) << "\" y2=\"" << py(c[3].z) << "\"/>\n";
  }
  for (const auto& [i, j] : contacts) {
    s << "<line stroke=\"#38761d\" stroke-width=\"2\" stroke-dasharray=\"4 3\" x1=\""
      << px(boxes[i].center.x) << "\" y1=\"" << py(boxes[i].center.z) << "\" x2=\""
      << px(boxes[j].center.x) << "\" y2=\"" << py(boxes[j].center.z) << "\"/>\n";
  }
  s << "<circle fill=\"#000\" r=\"4\" cx=\"" << px(0.0) << "\" cy=\"" << py(0.0) << "\"/>\n";
  s << "</svg>\n";
  return s.str();
}

}  // namespace relopt
