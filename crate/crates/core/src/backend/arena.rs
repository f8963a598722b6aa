//! Executable memory. One process-wide reservation keeps all generated code
//! in a single address range, which the fault handler uses to recognize
//! faults raised by guest code.

use std::collections::BTreeMap;
use std::ptr;
use std::sync::OnceLock;

use parking_lot::Mutex;

use crate::backend::rt;

const RESERVATION: usize = 1 << 30;

pub struct CodeArena {
    base: *mut u8,
    page: usize,
    /// Free runs: first page -> page count.
    free: Mutex<BTreeMap<usize, usize>>,
}

unsafe impl Send for CodeArena {}
unsafe impl Sync for CodeArena {}

/// Code placed in the arena; released when dropped.
pub struct CodeBlob {
    ptr: *const u8,
    len: usize,
    first_page: usize,
    pages: usize,
}

unsafe impl Send for CodeBlob {}
unsafe impl Sync for CodeBlob {}

impl CodeBlob {
    pub fn ptr(&self) -> *const u8 {
        self.ptr
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

pub fn arena() -> &'static CodeArena {
    static ARENA: OnceLock<CodeArena> = OnceLock::new();
    ARENA.get_or_init(|| {
        let page = unsafe { libc::sysconf(libc::_SC_PAGESIZE) } as usize;
        let base = unsafe {
            libc::mmap(
                ptr::null_mut(),
                RESERVATION,
                libc::PROT_NONE,
                libc::MAP_PRIVATE | libc::MAP_ANONYMOUS | libc::MAP_NORESERVE,
                -1,
                0,
            )
        };
        assert!(base != libc::MAP_FAILED, "cannot reserve code arena");
        let base = base as *mut u8;
        rt::register_code_range(base as usize, base as usize + RESERVATION);
        let mut free = BTreeMap::new();
        free.insert(0, RESERVATION / page);
        CodeArena { base, page, free: Mutex::new(free) }
    })
}

impl CodeArena {
    /// Copies `code` into fresh pages and makes them executable.
    pub fn place(&self, code: &[u8]) -> Option<CodeBlob> {
        let pages = code.len().div_ceil(self.page).max(1);
        let first = {
            let mut free = self.free.lock();
            let (&start, &n) = free.iter().find(|(_, &n)| n >= pages)?;
            free.remove(&start);
            if n > pages {
                free.insert(start + pages, n - pages);
            }
            start
        };
        let p = unsafe { self.base.add(first * self.page) };
        let len = pages * self.page;
        unsafe {
            if libc::mprotect(p as *mut _, len, libc::PROT_READ | libc::PROT_WRITE) != 0 {
                panic!("mprotect: {}", std::io::Error::last_os_error());
            }
            ptr::copy_nonoverlapping(code.as_ptr(), p, code.len());
            if libc::mprotect(p as *mut _, len, libc::PROT_READ | libc::PROT_EXEC) != 0 {
                panic!("mprotect: {}", std::io::Error::last_os_error());
            }
        }
        Some(CodeBlob { ptr: p, len: code.len(), first_page: first, pages })
    }

    fn release(&self, first: usize, pages: usize) {
        unsafe {
            libc::mprotect(self.base.add(first * self.page) as *mut _, pages * self.page, libc::PROT_NONE);
        }
        let mut free = self.free.lock();
        let (mut start, mut n) = (first, pages);
        if let Some((&s, &m)) = free.range(..first).next_back() {
            if s + m == first {
                free.remove(&s);
                start = s;
                n += m;
            }
        }
        if let Some(&m) = free.get(&(first + pages)) {
            free.remove(&(first + pages));
            n += m;
        }
        free.insert(start, n);
    }

    /// Pages currently handed out.
    pub fn used_pages(&self) -> usize {
        RESERVATION / self.page - self.free.lock().values().sum::<usize>()
    }
}

impl Drop for CodeBlob {
    fn drop(&mut self) {
        arena().release(self.first_page, self.pages);
    }
}
