//! Linear memory backed by an anonymous mapping whose base never moves.

use std::ptr;

use serde::{Deserialize, Serialize};

use crate::frontend::types::PAGE_SIZE;

/// Bytes reserved below the base in guard-page mode.
pub const GUARD_BELOW: u64 = 4 << 30;
/// Bytes reserved from the base upward: any 32-bit base plus any 32-bit
/// offset plus an access width stays inside.
pub const GUARD_ABOVE: u64 = (8 << 30) + PAGE_SIZE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MemoryMode {
    GuardPage,
    SoftwareCheck,
}

impl MemoryMode {
    pub fn name(self) -> &'static str {
        match self {
            MemoryMode::GuardPage => "guard",
            MemoryMode::SoftwareCheck => "software",
        }
    }

    pub fn parse(s: &str) -> Option<MemoryMode> {
        match s {
            "guard" | "guard-page" | "GuardPage" => Some(MemoryMode::GuardPage),
            "software" | "software-check" | "SoftwareCheck" => Some(MemoryMode::SoftwareCheck),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("cannot reserve linear memory: {0}")]
pub struct MemoryError(pub String);

pub struct LinearMemory {
    mode: MemoryMode,
    map: *mut u8,
    map_len: usize,
    base: *mut u8,
    pages: u32,
    max_pages: u32,
}

// The mapping is exclusively owned.
unsafe impl Send for LinearMemory {}

fn os_err(what: &str) -> MemoryError {
    MemoryError(format!("{what}: {}", std::io::Error::last_os_error()))
}

impl LinearMemory {
    /// A memory of zero pages that can never grow (modules without memory).
    pub fn empty(mode: MemoryMode) -> LinearMemory {
        LinearMemory {
            mode,
            map: ptr::null_mut(),
            map_len: 0,
            base: ptr::NonNull::<u64>::dangling().as_ptr() as *mut u8,
            pages: 0,
            max_pages: 0,
        }
    }

    pub fn new(mode: MemoryMode, initial: u32, max_pages: u32) -> Result<LinearMemory, MemoryError> {
        assert!(initial <= max_pages && max_pages <= 65536);
        let (map_len, below) = match mode {
            MemoryMode::GuardPage => ((GUARD_BELOW + GUARD_ABOVE) as usize, GUARD_BELOW as usize),
            MemoryMode::SoftwareCheck => (max_pages as usize * PAGE_SIZE as usize, 0),
        };
        if map_len == 0 {
            return Ok(LinearMemory::empty(mode));
        }
        let map = unsafe {
            libc::mmap(
                ptr::null_mut(),
                map_len,
                libc::PROT_NONE,
                libc::MAP_PRIVATE | libc::MAP_ANONYMOUS | libc::MAP_NORESERVE,
                -1,
                0,
            )
        };
        if map == libc::MAP_FAILED {
            return Err(os_err("mmap"));
        }
        let mut m = LinearMemory {
            mode,
            map: map as *mut u8,
            map_len,
            base: unsafe { (map as *mut u8).add(below) },
            pages: 0,
            max_pages,
        };
        if initial > 0 {
            m.protect(0, initial)?;
            m.pages = initial;
        }
        Ok(m)
    }

    fn protect(&mut self, from: u32, to: u32) -> Result<(), MemoryError> {
        let start = from as usize * PAGE_SIZE as usize;
        let len = (to - from) as usize * PAGE_SIZE as usize;
        let rc = unsafe {
            libc::mprotect(self.base.add(start) as *mut _, len, libc::PROT_READ | libc::PROT_WRITE)
        };
        if rc != 0 {
            return Err(os_err("mprotect"));
        }
        Ok(())
    }

    pub fn mode(&self) -> MemoryMode {
        self.mode
    }

    pub fn pages(&self) -> u32 {
        self.pages
    }

    pub fn max_pages(&self) -> u32 {
        self.max_pages
    }

    pub fn size(&self) -> u64 {
        self.pages as u64 * PAGE_SIZE
    }

    pub fn base(&self) -> *mut u8 {
        self.base
    }

    /// Reserved span `[lo, hi)`; empty when nothing is mapped.
    pub fn reservation(&self) -> (u64, u64) {
        (self.map as u64, self.map as u64 + self.map_len as u64)
    }

    /// Grow by `delta` pages. Returns the previous page count, or
    /// `u32::MAX` without changing anything if the limit would be exceeded.
    pub fn grow(&mut self, delta: u32) -> u32 {
        let old = self.pages;
        let Some(new) = old.checked_add(delta) else { return u32::MAX };
        if new > self.max_pages {
            return u32::MAX;
        }
        if delta > 0 {
            if self.protect(old, new).is_err() {
                return u32::MAX;
            }
            self.pages = new;
        }
        old
    }

    pub fn bytes(&self) -> &[u8] {
        if self.pages == 0 {
            return &[];
        }
        unsafe { std::slice::from_raw_parts(self.base, self.size() as usize) }
    }

    pub fn bytes_mut(&mut self) -> &mut [u8] {
        if self.pages == 0 {
            return &mut [];
        }
        unsafe { std::slice::from_raw_parts_mut(self.base, self.size() as usize) }
    }

    /// Checked read of `len` bytes at `offset`.
    pub fn read(&self, offset: u64, len: u64) -> Option<&[u8]> {
        let end = offset.checked_add(len)?;
        (end <= self.size()).then(|| &self.bytes()[offset as usize..end as usize])
    }

    pub fn write(&mut self, offset: u64, data: &[u8]) -> bool {
        let Some(end) = offset.checked_add(data.len() as u64) else { return false };
        if end > self.size() {
            return false;
        }
        self.bytes_mut()[offset as usize..end as usize].copy_from_slice(data);
        true
    }

    /// 64-bit FNV-1a over the accessible bytes.
    pub fn hash(&self) -> u64 {
        fnv1a(self.bytes())
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Drop for LinearMemory {
    fn drop(&mut self) {
        if !self.map.is_null() {
            unsafe {
                libc::munmap(self.map as *mut _, self.map_len);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn grow_semantics() {
        for mode in [MemoryMode::GuardPage, MemoryMode::SoftwareCheck] {
            let mut m = LinearMemory::new(mode, 1, 3).unwrap();
            assert_eq!(m.grow(0), 1);
            assert_eq!(m.grow(1), 1);
            assert_eq!(m.size(), 2 * PAGE_SIZE);
            let base = m.base();
            assert_eq!(m.grow(2), u32::MAX);
            assert_eq!(m.pages(), 2);
            assert_eq!(m.grow(1), 2);
            assert_eq!(m.base(), base);
            assert!(m.bytes().iter().all(|&b| b == 0));
            assert!(m.write(3 * PAGE_SIZE - 1, &[7]));
            assert!(!m.write(3 * PAGE_SIZE - 1, &[7, 7]));
            assert_eq!(m.read(3 * PAGE_SIZE - 1, 1), Some(&[7u8][..]));
        }
    }

    #[test]
    fn guard_reservation_spans_both_sides() {
        let m = LinearMemory::new(MemoryMode::GuardPage, 1, 1).unwrap();
        let (lo, hi) = m.reservation();
        assert_eq!(m.base() as u64 - lo, GUARD_BELOW);
        assert_eq!(hi - m.base() as u64, GUARD_ABOVE);
    }
}
