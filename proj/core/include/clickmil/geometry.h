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

#ifndef CLICKMIL_GEOMETRY_H_
#define CLICKMIL_GEOMETRY_H_

#include <utility>
#include <vector>

namespace clickmil {

// A position in image pixels. Origin is the top-left corner, y grows down.
struct Point {
  double x = 0.0;
  double y = 0.0;

  Point() = default;
  // Throws std::invalid_argument on non-finite coordinates.
  Point(double x, double y);

  friend bool operator==(const Point&, const Point&) = default;
};

// Axis-aligned box given by its top-left corner and a strictly positive size.
// Coordinates are continuous; nothing is ever rasterized.
class Box {
 public:
  // Throws std::invalid_argument unless w > 0, h > 0 and all values finite.
  Box(double x, double y, double w, double h);

  double x() const { return x_; }
  double y() const { return y_; }
  double w() const { return w_; }
  double h() const { return h_; }
  double right() const { return x_ + w_; }
  double bottom() const { return y_ + h_; }
  double area() const { return w_ * h_; }
  Point center() const { return Point(x_ + w_ / 2.0, y_ + h_ / 2.0); }

  friend bool operator==(const Box&, const Box&) = default;

 private:
  double x_, y_, w_, h_;
};

// Ordered vertex list. Construction validates vertex count, simplicity and a
// bounding box of positive area.
class Polygon {
 public:
  explicit Polygon(std::vector<Point> vertices);

  const std::vector<Point>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }

  // Whether the vertex cycle has no self-intersections.
  static bool IsSimple(const std::vector<Point>& vertices);
  // True when at least one interior angle exceeds 180 degrees.
  bool IsConcave() const;
  // Signed shoelace area, positive for counter-clockwise order in y-up frame.
  double SignedArea() const;

 private:
  std::vector<Point> vertices_;
};

double Euclidean(const Point& a, const Point& b);

// Intersection area of two boxes, 0 when disjoint.
double IntersectionArea(const Box& a, const Box& b);

// Intersection over union, in [0, 1].
double Iou(const Box& a, const Box& b);

inline Point BoxCenter(const Box& b) { return b.center(); }

// Tight bounding box of the vertices and the center of that box. This is the
// "imaginary box" center annotators are asked to click, not the centroid.
std::pair<Box, Point> PolygonBboxCenter(const Polygon& p);

// Largest box centered exactly at `c` that stays inside [0,w]x[0,h].
// Throws std::invalid_argument if `c` is not strictly inside the image.
Box MaxWindowAt(const Point& c, double img_w, double img_h);

// Midpoint of two points.
Point Midpoint(const Point& a, const Point& b);

// Clamps `p` into [0,w]x[0,h].
Point ClampToImage(const Point& p, double img_w, double img_h);

}  // namespace clickmil

#endif  // CLICKMIL_GEOMETRY_H_
