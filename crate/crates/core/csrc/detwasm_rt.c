/* Non-local exit from generated code and conversion of guard-page faults. */
#define _GNU_SOURCE
#include <setjmp.h>
#include <signal.h>
#include <stdint.h>
#include <string.h>
#include <ucontext.h>

/* Mirrors the leading fields of VmCtx. */
struct vmctx_prefix {
    sigjmp_buf *jmpbuf;
    uint64_t trap_code;
    uint64_t trap_detail;
    uint64_t trap_gas;
    uint64_t guard_lo;
    uint64_t guard_hi;
    uint8_t *mem_base;
    uint64_t mem_size;
};

#define TRAP_OOB 2

static __thread struct vmctx_prefix *active;
static volatile uintptr_t code_lo, code_hi;
static struct sigaction prev_segv, prev_bus;

typedef void (*tramp_fn)(void *, void *, void *);

int detwasm_enter(struct vmctx_prefix *vm, tramp_fn tramp, void *callee, void *values) {
    sigjmp_buf buf;
    sigjmp_buf *saved_buf = vm->jmpbuf;
    struct vmctx_prefix *saved_active = active;
    volatile int rc = 0;
    vm->jmpbuf = &buf;
    active = vm;
    if (sigsetjmp(buf, 0) == 0) {
        tramp(vm, callee, values);
    } else {
        rc = 1;
    }
    vm->jmpbuf = saved_buf;
    active = saved_active;
    return rc;
}

void detwasm_trap(struct vmctx_prefix *vm, uint64_t code, uint64_t detail, uint64_t gas) {
    vm->trap_code = code;
    vm->trap_detail = detail;
    vm->trap_gas = gas;
    siglongjmp(*vm->jmpbuf, 1);
}

void detwasm_set_code_range(uintptr_t lo, uintptr_t hi) {
    code_lo = lo;
    code_hi = hi;
}

static void chain(int sig, siginfo_t *si, void *uc) {
    struct sigaction *p = sig == SIGSEGV ? &prev_segv : &prev_bus;
    if (p->sa_flags & SA_SIGINFO) {
        p->sa_sigaction(sig, si, uc);
    } else if (p->sa_handler == SIG_DFL || p->sa_handler == SIG_IGN) {
        /* Returning re-executes the faulting instruction under the default action. */
        signal(sig, SIG_DFL);
    } else {
        p->sa_handler(sig);
    }
}

static void on_fault(int sig, siginfo_t *si, void *ucv) {
    ucontext_t *uc = ucv;
    struct vmctx_prefix *vm = active;
    uintptr_t pc = (uintptr_t)uc->uc_mcontext.gregs[REG_RIP];
    uintptr_t addr = (uintptr_t)si->si_addr;
    if (vm && vm->jmpbuf && pc >= code_lo && pc < code_hi && addr >= vm->guard_lo && addr < vm->guard_hi) {
        vm->trap_code = TRAP_OOB;
        vm->trap_detail = addr - (uintptr_t)vm->mem_base;
        vm->trap_gas = (uint64_t)uc->uc_mcontext.gregs[REG_R15];
        siglongjmp(*vm->jmpbuf, 1);
    }
    chain(sig, si, ucv);
}

void detwasm_install_handler(void) {
    struct sigaction sa;
    memset(&sa, 0, sizeof sa);
    sa.sa_sigaction = on_fault;
    sa.sa_flags = SA_SIGINFO | SA_NODEFER | SA_ONSTACK;
    sigemptyset(&sa.sa_mask);
    sigaction(SIGSEGV, &sa, &prev_segv);
    sigaction(SIGBUS, &sa, &prev_bus);
}
