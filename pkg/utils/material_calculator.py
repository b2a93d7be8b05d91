#!/usr/bin/env python3
"""
DEM Material Calculator Module
Unified elastic constant and wave speed calculations for linked-particle simulations
"""

import math
from typing import Dict, Tuple


class MaterialCalculationError(Exception):
    """Material calculation error"""
    pass


class MaterialCalculator:
    """
    Unified material calculator for DEM elastodynamics
    Handles Lamé constants, wave speeds and parameter validation
    """

    # Smallest admissible corrected volume, as a fraction of the particle volume
    MIN_CORRECTED_VOLUME_FRACTION = 0.05

    @staticmethod
    def validate_material_parameters(E: float, nu: float, rho: float) -> bool:
        """
        Validate continuum material parameters

        Args:
            E: Young modulus (Pa)
            nu: Poisson ratio
            rho: Density (kg/m^3)

        Returns:
            True if parameters are valid

        Raises:
            MaterialCalculationError: If parameters are invalid
        """
        for name, value in (('E', E), ('nu', nu), ('rho', rho)):
            if value is None or not math.isfinite(float(value)):
                raise MaterialCalculationError(f"{name} must be a finite number")

        if E <= 0:
            raise MaterialCalculationError("E must be positive")
        if rho <= 0:
            raise MaterialCalculationError("rho must be positive")
        if not -1.0 < nu < 0.5:
            raise MaterialCalculationError(f"nu must lie in (-1, 0.5), got {nu}")

        return True

    @staticmethod
    def shear_stiffness(E: float, nu: float) -> float:
        """Link stiffness factor E/(1+nu), i.e. twice the shear modulus"""
        return E / (1.0 + nu)

    @staticmethod
    def lame_lambda(E: float, nu: float) -> float:
        """First Lamé constant E nu / ((1+nu)(1-2nu))"""
        return E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))

    @staticmethod
    def free_volume_factor(nu: float) -> float:
        """Weight 3 nu / (1 - 2 nu) of the free volume in the corrected volume"""
        return 3.0 * nu / (1.0 - 2.0 * nu)

    @staticmethod
    def p_wave_speed(E: float, nu: float, rho: float) -> float:
        """
        Compressional wave speed of the 3D continuum

        Args:
            E: Young modulus (Pa)
            nu: Poisson ratio
            rho: Density (kg/m^3)

        Returns:
            c_p (m/s)
        """
        MaterialCalculator.validate_material_parameters(E, nu, rho)
        return math.sqrt(E * (1.0 - nu) / ((1.0 + nu) * (1.0 - 2.0 * nu) * rho))

    @staticmethod
    def s_wave_speed(E: float, nu: float, rho: float) -> float:
        """Shear wave speed sqrt(mu/rho)"""
        MaterialCalculator.validate_material_parameters(E, nu, rho)
        return math.sqrt(E / (2.0 * (1.0 + nu) * rho))

    @staticmethod
    def wave_speeds(E: float, nu: float, rho: float) -> Tuple[float, float]:
        """Return (c_p, c_s)"""
        return (MaterialCalculator.p_wave_speed(E, nu, rho),
                MaterialCalculator.s_wave_speed(E, nu, rho))

    @staticmethod
    def flexion_coefficients(Is: float, It: float, S: float,
                             E: float, nu: float) -> Tuple[float, float, float]:
        """
        Flexion/torsion coefficients of an interface

        Solves alpha_n + alpha_s = E Is / S, alpha_n + alpha_t = E It / S,
        alpha_s + alpha_t = E (Is + It) / (2 (1 + nu) S) in closed form.

        Args:
            Is: Second moment of the interface about the s axis (m^4)
            It: Second moment of the interface about the t axis (m^4)
            S: Interface area (m^2)
            E: Young modulus (Pa)
            nu: Poisson ratio

        Returns:
            Tuple (alpha_n, alpha_s, alpha_t)

        Raises:
            MaterialCalculationError: If the interface is degenerate
        """
        if S <= 0:
            raise MaterialCalculationError("interface area must be positive")
        if Is < 0 or It < 0:
            raise MaterialCalculationError("interface second moments must be non-negative")

        scale = E / (4.0 * (1.0 + nu) * S)
        alpha_n = (1.0 + 2.0 * nu) * scale * (Is + It)
        alpha_s = scale * ((3.0 + 2.0 * nu) * Is - (1.0 + 2.0 * nu) * It)
        alpha_t = scale * ((3.0 + 2.0 * nu) * It - (1.0 + 2.0 * nu) * Is)
        return alpha_n, alpha_s, alpha_t

    @staticmethod
    def material_summary(E: float, nu: float, rho: float) -> Dict[str, float]:
        """Collect derived constants for reporting"""
        c_p, c_s = MaterialCalculator.wave_speeds(E, nu, rho)
        return {
            'E': E,
            'nu': nu,
            'rho': rho,
            'lambda': MaterialCalculator.lame_lambda(E, nu),
            'mu': 0.5 * MaterialCalculator.shear_stiffness(E, nu),
            'c_p': c_p,
            'c_s': c_s,
        }


def main():
    """Test material calculator"""
    try:
        print("Testing Material Calculator")
        print("=" * 40)

        summary = MaterialCalculator.material_summary(1.88e10, 0.25, 2200.0)
        for key, value in summary.items():
            print(f"{key:<8}: {value:.6g}")

        print("\nTesting error handling:")
        try:
            MaterialCalculator.validate_material_parameters(1.0, 0.6, 1.0)
        except MaterialCalculationError as e:
            print(f"✓ Caught expected error: {e}")

        print("\n✓ All tests passed!")

    except Exception as e:
        print(f"✗ Test failed: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
