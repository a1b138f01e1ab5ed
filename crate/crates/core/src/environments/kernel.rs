use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use super::EnvironmentError;
use crate::linalg;

pub type KernelFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Interaction kernel `W`, referenced by name so that scenarios stay plain
/// data. Built-ins: `quadratic` (`‖u‖²`), `norm` (`‖u‖`) and `zero`. Other
/// convex kernels can be added with [`Kernel::register`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Kernel {
    pub name: String,
}

fn registry() -> &'static RwLock<HashMap<String, KernelFn>> {
    static REGISTRY: OnceLock<RwLock<HashMap<String, KernelFn>>> = OnceLock::new();
    REGISTRY.get_or_init(|| RwLock::new(HashMap::new()))
}

impl Kernel {
    pub fn quadratic() -> Self {
        Kernel { name: "quadratic".into() }
    }

    pub fn zero() -> Self {
        Kernel { name: "zero".into() }
    }

    pub fn named(name: &str) -> Self {
        Kernel { name: name.into() }
    }

    /// Registers `f` under `name`. The caller is responsible for `f` being
    /// convex and nonnegative; the interaction bound assumes both.
    pub fn register(name: &str, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        registry().write().expect("kernel registry poisoned").insert(name.into(), Arc::new(f));
        Kernel::named(name)
    }

    pub fn resolve(&self) -> Result<KernelFn, EnvironmentError> {
        let f: KernelFn = match self.name.as_str() {
            "quadratic" => Arc::new(linalg::norm_sq),
            "norm" => Arc::new(linalg::norm),
            "zero" => Arc::new(|_: &[f64]| 0.0),
            other => registry()
                .read()
                .expect("kernel registry poisoned")
                .get(other)
                .cloned()
                .ok_or_else(|| EnvironmentError::UnknownKernel(other.into()))?,
        };
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_and_registry() {
        assert_eq!(Kernel::quadratic().resolve().unwrap()(&[3.0, 4.0]), 25.0);
        assert_eq!(Kernel::named("norm").resolve().unwrap()(&[3.0, 4.0]), 5.0);
        assert_eq!(Kernel::zero().resolve().unwrap()(&[3.0]), 0.0);
        assert!(Kernel::named("nope").resolve().is_err());
        let k = Kernel::register("quartic-test", |u: &[f64]| linalg::norm_sq(u).powi(2));
        assert_eq!(k.resolve().unwrap()(&[2.0]), 16.0);
    }
}
