#pragma once

#include "fieldscope/dataset.hpp"
#include "fieldscope/dynamics.hpp"
#include "fieldscope/error.hpp"
#include "fieldscope/export.hpp"
#include "fieldscope/geometry.hpp"
#include "fieldscope/grid.hpp"
#include "fieldscope/ingest.hpp"
#include "fieldscope/session.hpp"
#include "fieldscope/surface.hpp"
#include "fieldscope/trace.hpp"
#include "fieldscope/ucd.hpp"
#include "fieldscope/vec3.hpp"
#include "fieldscope/visop.hpp"
#include "fieldscope/demo.hpp"
