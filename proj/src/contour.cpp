#include <cmath>
#include <map>
#include <ostream>

#include "dislo/micro2d.hpp"

namespace dislo::micro2d {

namespace {

struct Segment {
  std::size_t edge[2];
  Point p[2];
};

}  // namespace

std::vector<Polyline> extract_contours(const LevelSetField2D& field, double level) {
  field.validate();
  const Grid2D& g = field.grid;
  const double hx = g.dx(), hy = g.dy();
  auto val = [&](std::size_t i, std::size_t j) { return field.values[g.index(i % g.nx, j % g.ny)]; };
  // Horizontal edge (i,j)-(i+1,j) has id 2 k, vertical (i,j)-(i,j+1) has 2 k + 1.
  auto hid = [&](std::size_t i, std::size_t j) { return 2 * g.index(i % g.nx, j % g.ny); };
  auto vid = [&](std::size_t i, std::size_t j) { return 2 * g.index(i % g.nx, j % g.ny) + 1; };
  auto frac = [&](double a, double b) { return (level - a) / (b - a); };

  std::vector<Segment> segs;
  for (std::size_t j = 0; j < g.ny; ++j) {
    for (std::size_t i = 0; i < g.nx; ++i) {
      const double v00 = val(i, j), v10 = val(i + 1, j), v11 = val(i + 1, j + 1),
                   v01 = val(i, j + 1);
      const int mask = (v00 > level ? 1 : 0) | (v10 > level ? 2 : 0) | (v11 > level ? 4 : 0) |
                       (v01 > level ? 8 : 0);
      if (mask == 0 || mask == 15) continue;
      const double x0 = g.x(i), y0 = g.y(j);
      // Crossing points on the four cell edges: bottom, right, top, left.
      const Point pb{x0 + frac(v00, v10) * hx, y0};
      const Point pr{x0 + hx, y0 + frac(v10, v11) * hy};
      const Point pt{x0 + frac(v01, v11) * hx, y0 + hy};
      const Point pl{x0, y0 + frac(v00, v01) * hy};
      const std::size_t eb = hid(i, j), er = vid(i + 1, j), et = hid(i, j + 1), el = vid(i, j);
      auto add = [&](std::size_t e0, Point a, std::size_t e1, Point b) {
        segs.push_back({{e0, e1}, {a, b}});
      };
      const double centre = 0.25 * (v00 + v10 + v11 + v01);
      switch (mask) {
        case 1: case 14: add(el, pl, eb, pb); break;
        case 2: case 13: add(eb, pb, er, pr); break;
        case 3: case 12: add(el, pl, er, pr); break;
        case 4: case 11: add(er, pr, et, pt); break;
        case 6: case 9: add(eb, pb, et, pt); break;
        case 7: case 8: add(el, pl, et, pt); break;
        case 5:
          if (centre > level) {
            add(el, pl, et, pt);
            add(eb, pb, er, pr);
          } else {
            add(el, pl, eb, pb);
            add(er, pr, et, pt);
          }
          break;
        case 10:
          if (centre > level) {
            add(el, pl, eb, pb);
            add(er, pr, et, pt);
          } else {
            add(el, pl, et, pt);
            add(eb, pb, er, pr);
          }
          break;
        default: break;
      }
    }
  }

  std::multimap<std::size_t, std::size_t> by_edge;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    by_edge.emplace(segs[s].edge[0], s);
    by_edge.emplace(segs[s].edge[1], s);
  }
  std::vector<char> used(segs.size(), 0);
  auto other = [&](std::size_t edge, std::size_t self) -> long {
    auto [a, b] = by_edge.equal_range(edge);
    for (auto it = a; it != b; ++it)
      if (it->second != self && !used[it->second]) return static_cast<long>(it->second);
    return -1;
  };
  // Appends segment s entering through `edge`; shifts it by a lattice vector
  // so the shared point coincides with `tail`.
  auto follow = [&](std::size_t s, std::size_t edge, const Point& tail, std::size_t& out_edge,
                    Point& out_point) {
    const Segment& sg = segs[s];
    const int in = sg.edge[0] == edge ? 0 : 1;
    const double sx = std::round((tail.x - sg.p[in].x) / g.lx) * g.lx;
    const double sy = std::round((tail.y - sg.p[in].y) / g.ly) * g.ly;
    out_edge = sg.edge[1 - in];
    out_point = {sg.p[1 - in].x + sx, sg.p[1 - in].y + sy};
  };

  std::vector<Polyline> lines;
  for (std::size_t start = 0; start < segs.size(); ++start) {
    if (used[start]) continue;
    used[start] = 1;
    std::vector<Point> fwd{segs[start].p[0], segs[start].p[1]};
    std::size_t head_edge = segs[start].edge[1];
    bool closed = false;
    for (long s; (s = other(head_edge, start)) >= 0;) {
      used[s] = 1;
      Point p;
      follow(static_cast<std::size_t>(s), head_edge, fwd.back(), head_edge, p);
      fwd.push_back(p);
    }
    if (head_edge == segs[start].edge[0]) {
      closed = true;
      fwd.pop_back();
    } else {
      // Open chain: extend backwards from the start.
      std::vector<Point> back;
      std::size_t tail_edge = segs[start].edge[0];
      Point tail = fwd.front();
      for (long s; (s = other(tail_edge, start)) >= 0;) {
        used[s] = 1;
        Point p;
        follow(static_cast<std::size_t>(s), tail_edge, tail, tail_edge, p);
        back.push_back(p);
        tail = p;
      }
      fwd.insert(fwd.begin(), back.rbegin(), back.rend());
    }
    lines.push_back({std::move(fwd), closed});
  }
  return lines;
}

double polygon_area(const Polyline& line) {
  const auto& p = line.points;
  double a = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const Point& u = p[k];
    const Point& v = p[(k + 1) % p.size()];
    a += u.x * v.y - v.x * u.y;
  }
  return 0.5 * a;
}

void write_field_csv(std::ostream& out, const Grid2D& grid, std::span<const double> values,
                     double time) {
  out.precision(17);
  out << "nx,ny,dx,dy,time\n"
      << grid.nx << ',' << grid.ny << ',' << grid.dx() << ',' << grid.dy() << ',' << time << '\n';
  for (std::size_t j = 0; j < grid.ny; ++j) {
    for (std::size_t i = 0; i < grid.nx; ++i) out << (i ? "," : "") << values[grid.index(i, j)];
    out << '\n';
  }
}

void write_contours_csv(std::ostream& out, const std::vector<Polyline>& contours) {
  out.precision(17);
  out << "contour,x,y\n";
  for (std::size_t c = 0; c < contours.size(); ++c) {
    for (const auto& p : contours[c].points) out << c << ',' << p.x << ',' << p.y << '\n';
    if (contours[c].closed && !contours[c].points.empty())
      out << c << ',' << contours[c].points.front().x << ',' << contours[c].points.front().y
          << '\n';
  }
}

}  // namespace dislo::micro2d
