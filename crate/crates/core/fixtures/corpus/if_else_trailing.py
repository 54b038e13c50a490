flag = False
if flag:
    out = 1
else:
    out = 2
