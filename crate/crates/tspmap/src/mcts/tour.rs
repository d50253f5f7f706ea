//! Cyclic tour kept as a visiting order plus a position index, which is what
//! the k-opt path bookkeeping needs for O(1) successor/predecessor queries.

#[derive(Clone, Debug)]
pub(crate) struct TourOrder {
    ord: Vec<u32>,
    pos: Vec<u32>,
}

impl TourOrder {
    pub fn new(order: Vec<u32>) -> Self {
        let mut pos = vec![0u32; order.len()];
        for (i, &v) in order.iter().enumerate() {
            pos[v as usize] = i as u32;
        }
        Self { ord: order, pos }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.ord.len()
    }

    #[inline]
    pub fn order(&self) -> &[u32] {
        &self.ord
    }

    #[inline]
    pub fn at(&self, pos: u32) -> u32 {
        self.ord[pos as usize]
    }

    #[inline]
    pub fn pos(&self, v: u32) -> u32 {
        self.pos[v as usize]
    }

    #[inline]
    pub fn next(&self, v: u32) -> u32 {
        let n = self.ord.len() as u32;
        self.ord[((self.pos[v as usize] + 1) % n) as usize]
    }

    #[inline]
    pub fn prev(&self, v: u32) -> u32 {
        let n = self.ord.len() as u32;
        self.ord[((self.pos[v as usize] + n - 1) % n) as usize]
    }

    pub fn set_order(&mut self, order: Vec<u32>) {
        debug_assert_eq!(order.len(), self.ord.len());
        self.ord = order;
        for (i, &v) in self.ord.iter().enumerate() {
            self.pos[v as usize] = i as u32;
        }
    }
}
