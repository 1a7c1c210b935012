#pragma once

#include "mmlearn/cliques.hpp"
#include "mmlearn/constraints.hpp"
#include "mmlearn/evaluation.hpp"
#include "mmlearn/graph.hpp"
#include "mmlearn/io.hpp"
#include "mmlearn/oracle.hpp"
#include "mmlearn/pattern.hpp"
#include "mmlearn/purification.hpp"
#include "mmlearn/replication.hpp"
#include "mmlearn/simulation.hpp"
#include "mmlearn/stats.hpp"
#include "mmlearn/tetrad.hpp"
