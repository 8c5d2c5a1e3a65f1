//! Random 128-bit identifiers, rendered as 32 lowercase hex digits.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::entropy::{random_array, EntropySource};
use crate::error::Result;

macro_rules! id128 {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn generate(entropy: &dyn EntropySource) -> Result<Self> {
                let raw: [u8; 16] = random_array(entropy)?;
                Ok(Self(hex::encode(raw)))
            }

            /// Accepts exactly 32 lowercase hex digits.
            pub fn parse(s: &str) -> Option<Self> {
                (s.len() == 32 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')))
                    .then(|| Self(s.to_owned()))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl TryFrom<String> for $name {
            type Error = String;

            fn try_from(s: String) -> std::result::Result<Self, String> {
                Self::parse(&s).ok_or_else(|| format!("invalid {}", stringify!($name)))
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

id128!(
    /// 128-bit random session identifier, also the bearer credential.
    SessionId
);
id128!(TokenId);
id128!(
    /// Handle returned by a successful mailbox login.
    MailHandle
);
id128!(RecordId);
