#pragma once

// Everything in one include.

#include "loamkit/common.hpp"
#include "loamkit/geometry.hpp"
#include "loamkit/map/ikd_map.hpp"
#include "loamkit/map/map_store.hpp"
#include "loamkit/map/mto_octree_map.hpp"
#include "loamkit/normals.hpp"
#include "loamkit/pipeline.hpp"
#include "loamkit/preprocess.hpp"
#include "loamkit/registration.hpp"
#include "loamkit/sim/lidar.hpp"
#include "loamkit/sim/scene.hpp"
#include "loamkit/sim/trajectory.hpp"
#include "loamkit/spatial/brute_force_index.hpp"
#include "loamkit/spatial/incremental_kdtree.hpp"
#include "loamkit/spatial/neighbor.hpp"
#include "loamkit/spatial/octree.hpp"
#include "loamkit/spatial/static_kdtree.hpp"
#include "loamkit/eval/ape.hpp"
#include "loamkit/eval/config.hpp"
#include "loamkit/eval/dataset.hpp"
#include "loamkit/eval/harness.hpp"
