"""Every statement the package verifies maps to library code and to a test that exercises it."""

import importlib

import pytest

MANIFEST = {
    "ell-norm of the crosspolytope in closed form": ("isostab.gauss:ell_mc", "test_gauss:test_ell_mc_cross_and_cube"),
    "ell-norm as a Gaussian layer integral": ("isostab.gauss:ell_layer", "test_gauss:test_ell_layer_matches_direct"),
    "ell-norm equals half ell(B2) times mean width of the polar": ("isostab.gauss:duality_check", "test_gauss:test_duality_relation"),
    "isotropic measure definition and trace identity": ("isostab.isotropy:verify_isotropy", "test_isotropy:test_random_isotropic_properties"),
    "cross measures": ("isostab.isotropy:cross_measure", "test_isotropy:test_cross_measure_is_isotropic"),
    "John condition weights from contact points": ("isostab.isotropy:john_weights_from_contacts", "test_isotropy:test_john_weights_cube_contacts"),
    "near-orthonormal frame from clustered atoms": ("isostab.isotropy:near_orthonormal_basis", "test_isotropy:test_near_orthonormal_on_clustered_measure"),
    "Caratheodory sparsification to n(n+1)/2 atoms": ("isostab.isotropy:sparsify", "test_isotropy:test_sparsify_support_bound"),
    "Z and Z* bodies of an isotropic measure": ("isostab.bodies:z_bodies", "test_bodies:test_z_bodies_polar_pair_and_radius_bound"),
    "cut-corner cube family": ("isostab.bodies:cut_corner_cube", "test_bodies:test_cut_corner_vertices_match_enumeration"),
    "Gaussian cone lower bound": ("isostab.gauss:cap_measure_check", "test_gauss:test_cap_fraction_against_sampling"),
    "ell-norm difference bounded below by volume difference": ("isostab.gauss:ell_difference_check", "test_gauss:test_ell_difference_bound"),
    "hull of a near-crosspolytope vertex set": ("isostab.lemmas:check_close_to_cross", "test_lemmas:test_each_check_records_a_trial"),
    "support-function extremes of the cross measure bodies": ("isostab.experiments:run_experiment", "test_acceptance:test_measure_directional_suite"),
    "Ball-Barthe inequality": ("isostab.transport:ball_barthe_ratio", "test_transport:test_ball_barthe_at_least_one"),
    "Ball-Barthe stability": ("isostab.transport:ball_barthe_stability_check", "test_transport:test_stability_bound_equiangular"),
    "Brascamp-Lieb transport chain in the plane": ("isostab.transport:theta_chain", "test_transport:test_theta_chain_cross_and_perturbed"),
    "Gaussian measure of b Z* against the cube": ("isostab.transport:bl_verify", "test_acceptance:test_gaussian_measure_of_polar_bodies"),
    "transport map and its derivatives": ("isostab.transport:TransportKernel", "test_transport:test_phi_against_high_precision_root"),
    "bounds on the transport map": ("isostab.transport:transport_bound_suite", "test_transport:test_grid_suite_passes"),
    "planar scalar-product bound": ("isostab.lemmas:check_abs_scalar_prod", "test_lemmas:test_each_check_records_a_trial"),
    "simplex point norm bound": ("isostab.lemmas:check_simplex_angle", "test_lemmas:test_simplex_angle_hand_case"),
    "polytope with near-orthonormal normals close to the cube": ("isostab.lemmas:check_close_simplex", "test_lemmas:test_each_check_records_a_trial"),
    "cube cut by a tilted hyperplane loses volume": ("isostab.lemmas:check_volume_bound", "test_lemmas:test_each_check_records_a_trial"),
    "Hausdorff distance bounded by volume difference": ("isostab.metrics:groemer_check", "test_metrics:test_groemer_and_dilation_on_cut_corners"),
    "dilation distance versus Hausdorff distance": ("isostab.metrics:dilation_check", "test_metrics:test_groemer_and_dilation_on_cut_corners"),
    "Wasserstein distance bounded by support Hausdorff distance": ("isostab.metrics:hw_check", "test_metrics:test_hw_bound"),
    "orthogonally aligned distances": ("isostab.metrics:align_over_On", "test_metrics:test_alignment_recovers_rotated_points"),
    "sphere Wasserstein distance": ("isostab.metrics:wasserstein_sphere", "test_metrics:test_wasserstein_equal_weights_matches_assignment"),
    "volume difference of polytopes": ("isostab.metrics:vol_diff", "test_metrics:test_cut_corner_volume_deficit"),
    "stability shape on the John side": ("isostab.experiments:run_experiment", "test_acceptance:test_stability_shape"),
    "stability shape on the Lowner side": ("isostab.experiments:run_experiment", "test_experiments:test_cut_corner_slopes_in_range"),
    "stability of measure families": ("isostab.experiments:run_experiment", "test_experiments:test_measure_families"),
}


@pytest.mark.parametrize("statement", sorted(MANIFEST))
def test_statement_is_covered(statement):
    target, test = MANIFEST[statement]
    mod, name = target.split(":")
    assert callable(getattr(importlib.import_module(mod), name))
    tmod, tname = test.split(":")
    assert callable(getattr(importlib.import_module(tmod), tname)), f"{test} missing"
