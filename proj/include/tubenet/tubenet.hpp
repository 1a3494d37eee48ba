#ifndef TUBENET_TUBENET_HPP
#define TUBENET_TUBENET_HPP

#include "tubenet/errors.hpp"
#include "tubenet/geometry.hpp"
#include "tubenet/grid.hpp"
#include "tubenet/oracle.hpp"
#include "tubenet/pathfinder.hpp"
#include "tubenet/planner.hpp"
#include "tubenet/prioritizer.hpp"
#include "tubenet/report.hpp"
#include "tubenet/scenario.hpp"

#endif  // TUBENET_TUBENET_HPP
