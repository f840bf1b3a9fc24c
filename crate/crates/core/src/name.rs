use alloc::sync::Arc;
use core::fmt;

macro_rules! name_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(Arc<str>);

        impl $name {
            /// Wraps a token.
            pub fn new(token: &str) -> Self {
                $name(Arc::from(token))
            }

            /// The underlying token.
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl From<&str> for $name {
            fn from(token: &str) -> Self {
                $name::new(token)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", &*self.0)
            }
        }
    };
}

name_type!(
    /// An input or output symbol. Equality is by token.
    Symbol
);
name_type!(
    /// A string variable of a machine.
    Var
);
name_type!(
    /// A control state of a machine.
    StateId
);

/// Whether `token` is usable as a symbol, variable or state name.
pub(crate) fn valid_token(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| !c.is_whitespace() && !c.is_control())
}
