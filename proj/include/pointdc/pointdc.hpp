#pragma once

#include "pointdc/cluster.hpp"
#include "pointdc/codec.hpp"
#include "pointdc/config.hpp"
#include "pointdc/core.hpp"
#include "pointdc/dataset.hpp"
#include "pointdc/distill.hpp"
#include "pointdc/eval.hpp"
#include "pointdc/featnet.hpp"
#include "pointdc/geometry.hpp"
#include "pointdc/knn.hpp"
#include "pointdc/pipeline.hpp"
#include "pointdc/supervoxel.hpp"
#include "pointdc/svc.hpp"
#include "pointdc/synth.hpp"
