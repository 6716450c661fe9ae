//! Computational noncommutative geometry for subshifts and one-dimensional
//! substitution tilings: approximation trees, spectral triples, zeta
//! functions, Connes metrics, self-similar Laplacians and K-homology
//! pairings, with exact quadratic-field arithmetic where the underlying
//! expansion is quadratic.

pub mod error;
pub mod khom;
pub mod language;
pub mod laplacian;
pub mod measure;
pub mod metrics;
pub mod pisot;
pub mod returns;
pub mod quad;
pub mod selfsim;
pub mod sturmian;
pub mod substitution;
pub mod tree;
pub mod words;
pub mod zeta;

pub use error::{Error, Result};
pub use khom::{measure_pairings, nontriviality_check, pairing, pairing_counts, parse_homomorphism_tsv, realize, realize_with_choice, render_homomorphism_tsv, render_nontriviality, render_realization_tsv, Homomorphism, NontrivialityReport, NontrivialitySample, PairingBreakdown, PairingInput, Realization, RealizedTranche};
pub use language::{Cursor, EdgeShift, LanguageOracle, SuffixAutomaton};
pub use laplacian::{assemble_form, boundedness_scan, cuntz_krieger_check, eigensystem, exact_sibling_eigenvalue, mc_agreement, monte_carlo_form, path_space_triple, phi_residuals, weyl_count, BoundednessReport, ChoiceWeights, CkFamily, CkReport, EigenSystem, FormMatrix, McAgreement, MonteCarloForm, PathSpaceTriple, PhiCheck, Trend, WeylReport};
pub use metrics::{brute_force_distance, check_delta_conditions, d_inf_privileged, d_inf_tree, d_sup_privileged, d_sup_tree, metric_report, order_criterion, sample_boundary_pairs, DeltaVerdict, Distance, MetricForm, MetricReport, OrderReport, OrderVerdict, PairDistance};
pub use measure::{dirichlet_measure, path_measure, path_tree_measure, sturmian_word_measure, uniform_branching_measure, word_measure, DirichletEstimate, PathMeasure, TreeMeasure};
pub use returns::{complete_first_returns, is_privileged, privileged_by_length, privileged_prefix_orders, privileged_words, repulsiveness_index, bounded_powers, complexity_table, CfrSet, ComplexityTable, PowersReport, PrivilegedSet, RepulsivenessReport};
pub use pisot::{char_poly, frequencies, generator_eigenvalue, k_matrix, k_matrix_for_graph, laplacian_eigenvalue, phase_condition, phase_condition_scan, pisot_data, poly_roots, reduced_star, render_eigen_rows, render_pisot_block, theta_multiply, Conjugate, EigenRow, FormRegime, FrequencyVector, KMatrix, KTerm, PhaseReport, PhaseWitness, PisotData, PisotVerdict, StarImage};
pub use quad::{Quad, QuadField, Rat};
pub use selfsim::{build_substitution_graph, count_h_n, embed, hn_closed_form, hn_dominant_term, leftmost_longitudinal, lift_edges, lifted_microtile_vector, lifted_return_vector, longitudinal_choice, marked_points, maximal_fundamental, microtile_vector, minimal_fundamental, path_tree, return_vector, self_similar_choice, self_similar_choice_function, self_similar_edges, tile_geometry_f64, tile_geometry_quad, Flavor, FundamentalEdges, GeomScalar, GraphEdge, GraphPath, HnClosedForm, LongitudinalChoice, ReturnVector, SelfSimilarChoice, SubstitutionGraph, TileGeometry1D};
pub use tree::{build_tree, evaluate_choice, horizontal_edges, make_choice, make_choice_weighted, make_custom_choice, meet, privileged_meet, render_edges_tsv, sample_weighted_path, BoundaryPath, ChoiceFunction, ChoiceRule, EdgeScheme, HorizontalEdge, LengthFunction, Meet, Orientation, PrivilegedMeet, WordTree, ROOT};
pub use sturmian::{SturmianSlope, Tail};
pub use substitution::{PerronData, Substitution};
pub use words::{Alphabet, Letter, Word};
pub use zeta::{binary_branching_counts, closed_form_zeta, complexity_exponents, estimate_abscissa, full_triple_dimension, partial_zeta, zeta_extremes, zeta_k_tree, AbscissaEstimate, DiracSpectrum, PartialZeta, SpectrumLevel, TailBound, ZetaClosedForm, ZetaExtremes};
