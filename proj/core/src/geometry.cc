// Copyright 2026 The ClickMIL Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "clickmil/geometry.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace clickmil {

Point::Point(double x_in, double y_in) : x(x_in), y(y_in) {
  if (!std::isfinite(x) || !std::isfinite(y)) {
    throw std::invalid_argument("Point: non-finite coordinate");
  }
}

Box::Box(double x, double y, double w, double h) : x_(x), y_(y), w_(w), h_(h) {
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(w) ||
      !std::isfinite(h)) {
    throw std::invalid_argument("Box: non-finite value");
  }
  if (!(w > 0.0) || !(h > 0.0)) {
    throw std::invalid_argument("Box: width and height must be positive, got " +
                                std::to_string(w) + "x" + std::to_string(h));
  }
}

namespace {

double Cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool OnSegment(const Point& p, const Point& q, const Point& r) {
  return std::min(p.x, r.x) <= q.x && q.x <= std::max(p.x, r.x) &&
         std::min(p.y, r.y) <= q.y && q.y <= std::max(p.y, r.y);
}

int Sign(double v) { return (v > 0) - (v < 0); }

bool SegmentsIntersect(const Point& p1, const Point& p2, const Point& q1,
                       const Point& q2) {
  const int d1 = Sign(Cross(q1, q2, p1));
  const int d2 = Sign(Cross(q1, q2, p2));
  const int d3 = Sign(Cross(p1, p2, q1));
  const int d4 = Sign(Cross(p1, p2, q2));
  if (d1 != d2 && d3 != d4) return true;
  if (d1 == 0 && OnSegment(q1, p1, q2)) return true;
  if (d2 == 0 && OnSegment(q1, p2, q2)) return true;
  if (d3 == 0 && OnSegment(p1, q1, p2)) return true;
  if (d4 == 0 && OnSegment(p1, q2, p2)) return true;
  return false;
}

}  // namespace

Polygon::Polygon(std::vector<Point> vertices) : vertices_(std::move(vertices)) {
  if (vertices_.size() < 3) {
    throw std::invalid_argument("Polygon: need at least 3 vertices");
  }
  if (!IsSimple(vertices_)) {
    throw std::invalid_argument("Polygon: self-intersecting vertex cycle");
  }
  // Validates the bounding box through the Box invariant.
  PolygonBboxCenter(*this);
}

bool Polygon::IsSimple(const std::vector<Point>& v) {
  const std::size_t n = v.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a1 = v[i];
    const Point& a2 = v[(i + 1) % n];
    if (a1 == a2) return false;
    for (std::size_t j = i + 1; j < n; ++j) {
      // Adjacent edges share a vertex and are allowed to touch there.
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (SegmentsIntersect(a1, a2, v[j], v[(j + 1) % n])) return false;
    }
  }
  return true;
}

double Polygon::SignedArea() const {
  double acc = 0.0;
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = vertices_[i];
    const Point& b = vertices_[(i + 1) % n];
    acc += a.x * b.y - b.x * a.y;
  }
  return acc / 2.0;
}

bool Polygon::IsConcave() const {
  const double orientation = SignedArea() > 0 ? 1.0 : -1.0;
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double turn = Cross(vertices_[i], vertices_[(i + 1) % n],
                              vertices_[(i + 2) % n]);
    if (turn * orientation < 0) return true;
  }
  return false;
}

double Euclidean(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

double IntersectionArea(const Box& a, const Box& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x(), b.x());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y(), b.y());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double Iou(const Box& a, const Box& b) {
  const double inter = IntersectionArea(a, b);
  if (inter == 0.0) return 0.0;
  if (a == b) return 1.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::pair<Box, Point> PolygonBboxCenter(const Polygon& p) {
  double x0 = p.vertices().front().x, x1 = x0;
  double y0 = p.vertices().front().y, y1 = y0;
  for (const Point& v : p.vertices()) {
    x0 = std::min(x0, v.x);
    x1 = std::max(x1, v.x);
    y0 = std::min(y0, v.y);
    y1 = std::max(y1, v.y);
  }
  Box box(x0, y0, x1 - x0, y1 - y0);
  return {box, box.center()};
}

Box MaxWindowAt(const Point& c, double img_w, double img_h) {
  if (!(c.x > 0.0 && c.x < img_w && c.y > 0.0 && c.y < img_h)) {
    throw std::invalid_argument("MaxWindowAt: point outside image");
  }
  const double half_w = std::min(c.x, img_w - c.x);
  const double half_h = std::min(c.y, img_h - c.y);
  return Box(c.x - half_w, c.y - half_h, 2.0 * half_w, 2.0 * half_h);
}

Point Midpoint(const Point& a, const Point& b) {
  return Point((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
}

Point ClampToImage(const Point& p, double img_w, double img_h) {
  return Point(std::clamp(p.x, 0.0, img_w), std::clamp(p.y, 0.0, img_h));
}

}  // namespace clickmil
